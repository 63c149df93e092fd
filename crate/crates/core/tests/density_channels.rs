use vacpol::density::{
    assemble_density, channel_density, default_interval, uniform_grid, MomentumRule, SampledDensity,
};
use vacpol::radial::PhysicalParams;
use vacpol::ALPHA;

fn uranium(k_max: u32, lambda0: f64) -> PhysicalParams {
    let gamma = 92.0 * ALPHA;
    PhysicalParams { charge: 92, alpha: ALPHA, k_max, m_lambda: 5, lambda: 0.5 * gamma, lambda0 }
}

fn nearly_free(k_max: u32) -> PhysicalParams {
    PhysicalParams { charge: 1, alpha: 1e-12, k_max, m_lambda: 5, lambda: 0.3, lambda0: 5.0 }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn free_limit_pairs_cancel() {
    // at γ → 0 charge conjugation maps the negative-energy states of κ onto the
    // positive-energy ones of -κ, so the ±κ pair cancels
    let p = nearly_free(3);
    let grid = uniform_grid(0.4, 1.6, 7).unwrap();
    let rule = MomentumRule { nodes: 8, max_width: None };
    for k in 1..=3 {
        let neg = channel_density(&p, -k, &grid, &rule).unwrap();
        let pos = channel_density(&p, k, &grid, &rule).unwrap();
        let scale = max_abs(&neg.y_minus);
        assert!(scale > 0.0);
        for i in 0..grid.len() {
            assert!((neg.y_minus[i] - pos.y_plus[i]).abs() < 1e-9 * scale);
            assert!((neg.y_plus[i] - pos.y_minus[i]).abs() < 1e-9 * scale);
        }
        assert!(neg.y_bound.iter().chain(&pos.y_bound).all(|&v| v == 0.0));
        let pair: Vec<f64> = neg.contribution().iter().zip(pos.contribution()).map(|(a, b)| a + b).collect();
        assert!(max_abs(&pair) < 1e-9 * 2.0 * k as f64 * scale);
    }
}

#[test]
fn free_limit_single_channel_pair_vanishes() {
    let p = nearly_free(1);
    let grid = uniform_grid(0.4, 1.6, 5).unwrap();
    let rule = MomentumRule { nodes: 8, max_width: None };
    let d = assemble_density(&p, &grid, (0.4, 1.6), &rule, true).unwrap();
    let scale = max_abs(&d.channel_breakdown.as_ref().unwrap()[0].y_minus);
    assert!(max_abs(&d.values) < 1e-9 * scale, "{:?}", d.values);
}

#[test]
fn momentum_rule_converges() {
    let p = uranium(1, 5.0);
    let grid = uniform_grid(0.5, 1.5, 5).unwrap();
    for kappa in [-1, 1] {
        let coarse = channel_density(&p, kappa, &grid, &MomentumRule { nodes: 8, max_width: None }).unwrap();
        let fine = channel_density(&p, kappa, &grid, &MomentumRule { nodes: 64, max_width: None }).unwrap();
        let (c, f) = (coarse.contribution(), fine.contribution());
        let scale = max_abs(&f);
        for i in 0..grid.len() {
            assert!((c[i] - f[i]).abs() < 1e-4 * scale, "κ={kappa} x={}: {} {}", grid[i], c[i], f[i]);
        }
    }
}

#[test]
fn doubling_the_radial_cutoff_in_the_interior() {
    let grid = vec![0.5, 0.8, 1.0];
    let rule = MomentumRule { nodes: 8, max_width: None };
    let k8 = assemble_density(&uranium(8, 5.0), &grid, (0.4, 2.7), &rule, false).unwrap();
    let k16 = assemble_density(&uranium(16, 5.0), &grid, (0.4, 2.7), &rule, false).unwrap();
    for ((x, a), b) in grid.iter().zip(&k8.values).zip(&k16.values) {
        assert!((a - b).abs() < 0.01 * b.abs(), "x={x}: {a} vs {b}");
    }
}

#[test]
fn channels_eventually_decay() {
    let p = uranium(20, 5.0);
    let grid = uniform_grid(0.4, 1.2, 5).unwrap();
    let rule = MomentumRule { nodes: 8, max_width: None };
    let d = assemble_density(&p, &grid, (0.4, 1.2), &rule, true).unwrap();
    let ch = d.channel_breakdown.unwrap();
    // |κ| from 11 to 20, both signs of κ summed
    let size: Vec<f64> = (11..=20)
        .map(|k| {
            let pair: Vec<f64> = ch
                .iter()
                .filter(|c| c.kappa.abs() == k)
                .map(|c| c.contribution())
                .fold(vec![0.0; grid.len()], |acc, v| acc.iter().zip(v).map(|(a, b)| a + b).collect());
            max_abs(&pair)
        })
        .collect();
    for w in size.windows(2) {
        assert!(w[1] < w[0], "{size:?}");
    }
}

#[test]
fn repeated_runs_are_identical() {
    let p = uranium(3, 5.0);
    let grid = uniform_grid(0.4, 1.3, 6).unwrap();
    let rule = MomentumRule { nodes: 8, max_width: None };
    let a = assemble_density(&p, &grid, (0.4, 1.3), &rule, true).unwrap();
    let b = assemble_density(&p, &grid, (0.4, 1.3), &rule, true).unwrap();
    assert_eq!(a, b);
}

#[test]
fn csv_round_trip_is_exact() {
    let p = uranium(2, 5.0);
    let (a, _) = default_interval(&p);
    let grid = uniform_grid(a, 1.0, 5).unwrap();
    let d = assemble_density(&p, &grid, (a, 1.0), &MomentumRule { nodes: 8, max_width: None }, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("density.csv");
    d.write_csv(&path, &["config 0123".to_string()]).unwrap();
    let (xs, ys) = SampledDensity::read_csv(&path).unwrap();
    assert_eq!(xs, d.grid);
    assert_eq!(ys, d.values);
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("# config 0123\n"));
}

/// Full-scale profile: minutes of compute, run with `--ignored`.
#[test]
#[ignore]
fn full_scale_profile_shape() {
    let p = PhysicalParams { charge: 92, alpha: ALPHA, k_max: 55, m_lambda: 11, lambda: 0.5 * 92.0 * ALPHA, lambda0: 7.58 };
    let (a, b) = default_interval(&p);
    let grid = uniform_grid(a, b.min(3.0), 40).unwrap();
    let d = assemble_density(&p, &grid, (a, b), &MomentumRule { nodes: 8, max_width: None }, false).unwrap();
    // the density is dominated by a negative linear term
    assert!(d.values.iter().all(|v| v.is_finite() && *v < 0.0));
    let mid = d.values.len() / 2;
    assert!(d.values[d.values.len() - 1] < d.values[mid] && d.values[mid] < d.values[0]);
}
