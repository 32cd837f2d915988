use super::*;
use crate::evolution::survival_prob;
use crate::stats::{chi_square_geometric, ks_two_sample, mc_mean_se, proportion_se};
use crate::typespace::{ExpFamilyTriplet, FiniteTriplet};
use approx::assert_abs_diff_eq;
use std::f64::consts::E;

fn scalar(k: f64, m: f64) -> FiniteTriplet {
    FiniteTriplet::new(vec![vec![k]], vec![1.0], m).unwrap()
}

#[test]
fn sterile_kernel_dies_at_once() {
    let t = scalar(0.0, 3.0);
    let mut rng = rng::stream(0, 0);
    for _ in 0..100 {
        let run = simulate_bgw(&t, Start::Gamma, 3, POPULATION_CAP, &mut rng).unwrap();
        assert_eq!(run.len(), 4);
        assert_eq!(run[0].len(), 1);
        assert!(run[1].is_empty());
    }
}

#[test]
fn critical_scalar_survival() {
    let t = scalar(0.5, 1.0);
    let reps = 100_000;
    let alive = run_replicates(1, reps, |_, rng| bgw_size(&t, Start::Gamma, 10, POPULATION_CAP, rng).unwrap() > 0);
    let p = proportion_se(alive.iter().filter(|a| **a).count(), reps).unwrap();
    assert!(p.covers(1.0 / 11.0, 3.0), "{p:?}");
}

#[test]
fn first_generation_mean() {
    let t = ExpFamilyTriplet::new(1.0, 1.0, 2.0).unwrap();
    let x = TypePoint::Real(0.4);
    let sizes = run_replicates(2, 1_000_000, |_, rng| bgw_size(&t, Start::Point(x), 1, POPULATION_CAP, rng).unwrap() as f64);
    let ms = mc_mean_se(&sizes).unwrap();
    assert!(ms.covers((-0.4f64).exp() * 3.0, 3.0), "{ms:?}");
}

#[test]
fn population_cap_is_reported() {
    let t = scalar(1.0, 5.0);
    let mut rng = rng::stream(3, 0);
    let e = simulate_bgw(&t, Start::Gamma, 30, 1000, &mut rng).unwrap_err();
    assert!(matches!(e, Error::PopulationCap { cap: 1000, .. }));
}

#[test]
fn snapshots_track_generation() {
    let t = scalar(0.6, 1.0);
    let run = simulate_bgw(&t, Start::Point(TypePoint::Index(0)), 5, POPULATION_CAP, &mut rng::stream(4, 0)).unwrap();
    for (g, s) in run.iter().enumerate() {
        assert_eq!(s.generation, g);
    }
    assert!(simulate_bgw(&t, Start::Point(TypePoint::Index(3)), 5, 10, &mut rng::stream(4, 0)).is_err());
}

#[test]
fn life_length_sampler() {
    let law = LifeLengthLaw::exp_family(1.0, 1.0);
    let draws = run_replicates(5, 1_000_000, |_, rng| sample_life_length(&law, rng) as f64);
    let ms = mc_mean_se(&draws).unwrap();
    assert!(ms.covers(E - 1.0, 3.0), "{ms:?}");
    let over1 = draws.iter().filter(|&&l| l > 1.0).count();
    assert!(proportion_se(over1, draws.len()).unwrap().covers(0.5, 3.0));
    assert!(draws.iter().all(|&l| l >= 1.0));

    let law = LifeLengthLaw::finite(&scalar(0.4, 1.0)).unwrap();
    let draws = run_replicates(6, 200_000, |_, rng| sample_life_length(&law, rng));
    for n in 1..5u64 {
        let hits = draws.iter().filter(|&&l| l > n).count();
        assert!(proportion_se(hits, draws.len()).unwrap().covers(0.4f64.powi(n as i32), 3.0));
    }
}

#[test]
fn cmj_basics() {
    let law = LifeLengthLaw::exp_family(1.0, 1.0);
    let mut rng = rng::stream(7, 0);
    for _ in 0..100 {
        assert_eq!(simulate_cmj(&law, 2.0, 0, POPULATION_CAP, &mut rng).unwrap(), vec![1]);
        assert_eq!(simulate_contour(&law, 2.0, 0, STEP_CAP, &mut rng).unwrap(), 1);
    }
    // mean litter at age n is m·d_n
    let m = 1.5;
    let reps = 200_000;
    let litters = run_replicates(8, reps, |_, rng| CmjIndividual::sample(&law, m, 0, 10, rng));
    for age in 1..4 {
        let v: Vec<f64> = litters.iter().map(|i| i.litters.get(age - 1).copied().unwrap_or(0) as f64).collect();
        let ms = mc_mean_se(&v).unwrap();
        assert!(ms.covers(m * law.d(age), 3.0), "age {age}: {ms:?}");
    }
    assert!(litters.iter().all(|i| i.litters.len() as u64 == i.life_length - 1 || i.litters.len() == 10));
}

#[test]
fn contour_walk_shape() {
    let law = LifeLengthLaw::exp_family(1.0, 1.0);
    let mut rng = rng::stream(9, 0);
    for _ in 0..200 {
        let walk = trace_contour(&law, 2.0, 5, STEP_CAP, &mut rng).unwrap();
        let h = walk.heights();
        assert!(h.iter().all(|&v| v >= 0));
        assert_eq!(*h.last().unwrap(), 0);
        assert!(h.iter().all(|&v| v <= 6));
        let tops = walk.path.iter().filter(|s| matches!(s, ContourStep::Up(_))).count() as u64;
        assert!(walk.excursions <= tops);
        for w in walk.path.windows(2) {
            assert!(!matches!(w, [ContourStep::Down(_), ContourStep::Down(_)]));
        }
    }
}

fn three_way(t: &ExpFamilyTriplet, n: usize, reps: usize, seed: u64) {
    let law = t.life_length_law().unwrap();
    let m = t.m();
    let direct: Vec<f64> = run_replicates(seed, reps, |_, rng| bgw_size(t, Start::Gamma, n, POPULATION_CAP, rng).unwrap() as f64);
    let cmj: Vec<f64> =
        run_replicates(seed + 1, reps, |_, rng| simulate_cmj(&law, m, n, POPULATION_CAP, rng).unwrap()[n] as f64);
    let contour: Vec<f64> =
        run_replicates(seed + 2, reps, |_, rng| simulate_contour(&law, m, n, STEP_CAP, rng).unwrap() as f64);
    for (a, b, label) in [(&direct, &cmj, "direct/cmj"), (&direct, &contour, "direct/contour"), (&cmj, &contour, "cmj/contour")] {
        let ks = ks_two_sample(a, b).unwrap();
        assert!(ks.p_value > 0.01, "{label} n={n}: {ks:?}");
    }
    // survival against the exact formula, started from γ
    let surv: f64 = {
        let lawn = crate::evolution::evolve(t, n).unwrap();
        let g = |y: TypePoint| lawn.survival(y).unwrap();
        t.gamma().integrate(&crate::typespace::TestFn::Custom(&g)).unwrap()
    };
    let hits = contour.iter().filter(|&&z| z > 0.0).count();
    assert!(proportion_se(hits, reps).unwrap().covers(surv, 3.0), "survival {surv}");
}

#[test]
fn three_constructions_agree() {
    for (i, m) in [1.0, 1.0 / (E - 2.0), 2.0].into_iter().enumerate() {
        let t = ExpFamilyTriplet::new(1.0, 1.0, m).unwrap();
        three_way(&t, 4, 10_000, 100 + 10 * i as u64);
    }
}

#[test]
fn contour_conditional_law_is_geometric() {
    let t = scalar(0.5, 1.0);
    let law = t.life_length_law().unwrap();
    let n = 6;
    let sizes: Vec<u64> = run_replicates(11, 100_000, |_, rng| simulate_contour(&law, 1.0, n, STEP_CAP, rng).unwrap())
        .into_iter()
        .filter(|&z| z > 0)
        .collect();
    let chi = chi_square_geometric(&sizes, n as f64).unwrap();
    assert!(chi.p_value > 0.01, "{chi:?}");
    let p = proportion_se(sizes.len(), 100_000).unwrap();
    assert!(p.covers(survival_prob(&t, TypePoint::Index(0), n).unwrap(), 3.0));
}

#[test]
fn typed_lineage() {
    let t = ExpFamilyTriplet::new(1.0, 1.0, 1.0).unwrap();
    let mut rng = rng::stream(12, 0);
    for _ in 0..1000 {
        let path = simulate_typed_lineage(&t, TypePoint::Real(0.2), &mut rng).unwrap();
        for w in path.windows(2) {
            assert!(w[1].real().unwrap() > w[0].real().unwrap());
        }
    }
    let sterile = scalar(0.0, 1.0);
    assert_eq!(simulate_typed_lineage(&sterile, TypePoint::Index(0), &mut rng).unwrap().len(), 1);

    let law = t.life_length_law().unwrap();
    let from_gamma = run_replicates(13, 20_000, |_, rng| {
        let x = t.gamma().sample(rng);
        simulate_typed_lineage(&t, x, rng).unwrap().len() as f64
    });
    let direct = run_replicates(14, 20_000, |_, rng| sample_life_length(&law, rng) as f64);
    assert!(ks_two_sample(&from_gamma, &direct).unwrap().p_value > 0.01);
}

#[test]
fn replicates_are_order_stable() {
    let a = run_replicates(77, 1000, |i, rng| (i, rng::exponential(rng, 1.0)));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| run_replicates(77, 1000, |i, rng| (i, rng::exponential(rng, 1.0))));
    assert_eq!(a, b);
    assert_abs_diff_eq!(a[0].1, b[0].1);
}
