use kmtc_core::coupling::{compose_chain, run_coupling, Engine, EngineConfig};
use kmtc_core::dist::{build_density, sample, standardize, FamilySpec1D, ProductFamily};
use kmtc_core::dyadic::BlockTree;
use kmtc_core::numerics::{cdf_of, convolve, self_convolve_pow2, Grid, GridCdf};
use kmtc_core::rng::stream;
use kmtc_core::stats::{ks_critical, ks_statistic};

fn std_poly(tau: f64) -> FamilySpec1D {
    standardize(&FamilySpec1D::poly_gaussian(tau, 1)).unwrap()
}

fn config(family: FamilySpec1D, d: usize, depth: u32) -> EngineConfig {
    EngineConfig::new(depth, ProductFamily::iid(family, d).unwrap())
}

#[test]
fn block_sums_match_the_leaves() {
    for (family, d) in [(std_poly(0.4), 1), (FamilySpec1D::standard_gaussian(), 2)] {
        let out = run_coupling(&config(family, d, 8).with_seed(3)).unwrap();
        for j in 0..d {
            let leaves: Vec<f64> = (0..out.len()).map(|k| out.x_row(k)[j]).collect();
            let tree = BlockTree::from_leaves(&leaves).unwrap();
            for n in 0..=8usize {
                let built = &out.blocks[n];
                for (k, s) in tree.sums[n].iter().enumerate() {
                    let b = built[k * d + j];
                    assert!((b - s).abs() <= 1e-12 * (1.0 + s.abs()), "n={n} k={k}: {b} vs {s}");
                }
            }
        }
    }
}

#[test]
fn replicates_are_reproducible_and_distinct() {
    let engine = Engine::new(config(std_poly(0.3), 1, 6)).unwrap();
    let a = engine.run_replicate(11, 4).unwrap();
    let b = engine.run_replicate(11, 4).unwrap();
    let c = engine.run_replicate(11, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.x, c.x);
    assert_eq!(run_coupling(&config(std_poly(0.3), 1, 6).with_seed(11)).unwrap(), engine.run_replicate(11, 0).unwrap());
}

fn block_cdf(family: &FamilySpec1D, level: u32) -> GridCdf {
    let base = build_density(family, &Grid::covering(14.0, 1.0 / 64.0).unwrap()).unwrap();
    cdf_of(&self_convolve_pow2(&base, level).unwrap())
}

#[test]
fn coupled_walk_has_the_target_law() {
    let family = std_poly(0.5);
    let engine = Engine::new(config(family.clone(), 1, 6)).unwrap();
    let reps = 3000;
    let outs: Vec<_> = (0..reps).map(|i| engine.run_replicate(7, i).unwrap()).collect();
    let crit = ks_critical(0.01) / (reps as f64).sqrt();
    for (level, k) in [(0u32, 0usize), (0, 37), (3, 2), (6, 0)] {
        let cdf = block_cdf(&family, level);
        let mut xs: Vec<f64> = outs.iter().map(|o| o.blocks[level as usize][k]).collect();
        let ks = ks_statistic(&mut xs, |x| cdf.eval(x));
        assert!(ks < crit, "level {level} block {k}: KS {ks} >= {crit}");
    }
}

#[test]
fn self_convolution_matches_sequential() {
    let p = build_density(&std_poly(0.8), &Grid::covering(14.0, 1.0 / 32.0).unwrap()).unwrap();
    let fast = self_convolve_pow2(&p, 3).unwrap();
    let mut slow = p.clone();
    for _ in 1..8 {
        slow = convolve(&slow, &p).unwrap();
    }
    assert!((fast.variance() - 8.0).abs() < 1e-8 && (slow.variance() - 8.0).abs() < 1e-8);
    let worst = (0..=200)
        .map(|i| -12.0 + 0.12 * i as f64)
        .map(|x| (fast.eval(x) - slow.eval(x)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst:e}");
}

#[test]
fn exact_sampler_has_the_target_law() {
    for family in [
        FamilySpec1D::poly_gaussian(1.0, 2),
        FamilySpec1D::smoothed_compact(FamilySpec1D::uniform(1.0), 0.25),
        FamilySpec1D::conv_power(FamilySpec1D::raised_cosine(1.0), 3),
    ] {
        let pf = ProductFamily::iid(family.clone(), 1).unwrap();
        let mut xs: Vec<f64> = sample(&pf, 20_000, &mut stream(5, 0)).into_iter().map(|r| r[0]).collect();
        let cdf = cdf_of(&build_density(&family, &Grid::covering(14.0, 1.0 / 128.0).unwrap()).unwrap());
        let ks = ks_statistic(&mut xs, |x| cdf.eval(x));
        assert!(ks < ks_critical(0.01) / (20_000f64).sqrt(), "{family}: {ks}");
    }
}

#[test]
fn chain_stays_within_block_sum() {
    let out = compose_chain(&config(std_poly(0.3), 1, 1).with_seed(2), 3).unwrap();
    assert_eq!(out.x.len(), 256);
    let sum: f64 = out.blocks.iter().map(|b| b.delta).sum();
    assert!(out.delta <= sum * (1.0 + 1e-12));
}
