//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers (run with `--nocapture` to see them).

mod common;

use common::*;
use peacock_core::dilation::finite_nsi;
use peacock_core::martingale::{
    build, build_with_table, default_alpha_grid, discretize, sample, verify_marginals,
    verify_martingale, DistributionSpec,
};
use peacock_core::measure::{
    check_c_plus_order, check_convex_order, check_cs_order, check_positive_order, w1_distance,
    Measure,
};
use peacock_core::mot::{
    brute_force_shadow, c_uv_expectation, left_curtain_coupling, martingale_polytope_vertices,
    mot_lp, mot_lp_multistep, msm_representation_check, MsmCost,
};
use peacock_core::parametrization::{check_cs_convex, Parametrization};
use peacock_core::rng::Stream;
use peacock_core::shadow::{
    obstructed_shadow, shadow_associativity_check, shadow_homogeneity_check, simple_shadow,
    Peacock,
};
use std::time::Instant;

fn m(atoms: &[(f64, f64)]) -> Measure {
    Measure::from_atoms(atoms.to_vec())
}

#[test]
fn criterion_01_golden_obstructed_shadow() {
    let nu = Measure::dirac(0.0, 0.5);
    let chain = [
        m(&[(-1.0, 0.5), (1.0, 0.5)]),
        m(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]),
    ];
    let expected = m(&[(0.0, 0.25), (-2.0, 0.125), (2.0, 0.125)]);

    let warmup = obstructed_shadow(&nu, &chain).unwrap();
    assert!(warmup.max_deviation(&expected) <= 1e-12);

    let start = Instant::now();
    let result = obstructed_shadow(&nu, &chain).unwrap();
    let elapsed = start.elapsed();

    let dev = result.max_deviation(&expected);
    assert!(dev <= 1e-12, "atomwise deviation {dev:.3e} exceeds 1e-12");
    assert!(
        elapsed.as_secs_f64() < 1e-3,
        "runtime {elapsed:?} exceeds 1 ms"
    );
    println!(
        "criterion 01 PASS: golden shadow exact (deviation {dev:.1e}, {:.0} µs)",
        elapsed.as_secs_f64() * 1e6
    );
}

#[test]
fn criterion_02_nsi_dichotomy() {
    // the pre-limit families share the same three marginals for every n;
    // the interior time moves with n, which the check is insensitive to
    for t_mid in [0.25, 0.5, 0.9, 0.99] {
        let p = Peacock::new(
            vec![0.0, t_mid, 1.0],
            vec![
                Measure::dirac(0.0, 1.0),
                m(&[(-1.0, 0.5), (1.0, 0.5)]),
                m(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]),
            ],
        )
        .unwrap();
        let start = Instant::now();
        let (ok, _) = finite_nsi(&p).unwrap();
        let elapsed = start.elapsed();
        assert!(ok, "pre-limit family at t_mid={t_mid} must be NSI");
        assert!(elapsed.as_secs_f64() < 0.01, "NSI check exceeded 10 ms");
    }

    let limit = Peacock::new(
        vec![0.0, 0.5, 1.0],
        vec![
            Measure::dirac(0.0, 1.0),
            Measure::dirac(0.0, 1.0),
            m(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]),
        ],
    )
    .unwrap();
    let start = Instant::now();
    let (ok, report) = finite_nsi(&limit).unwrap();
    let elapsed = start.elapsed();
    assert!(!ok, "limit family must not be NSI");
    assert_eq!(report.failing_times(), vec![1.0]);
    assert!(elapsed.as_secs_f64() < 0.01, "NSI check exceeded 10 ms");
    println!("criterion 02 PASS: NSI true pre-limit, false in the limit (t=1 flagged)");
}

#[test]
fn criterion_03_shadow_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = Stream::new(301, 0);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let (nu, mu) = random_c_plus_pair(&mut rng, 6, 2.0);
        if nu.is_zero() {
            continue;
        }
        let closed = simple_shadow(&nu, &mu).unwrap();
        let lp = brute_force_shadow(&nu, &mu).unwrap();
        let dev = closed.max_deviation(&lp);
        assert!(dev < 1e-7, "trial {trial}: deviation {dev:.3e}");
        worst = worst.max(dev);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
    println!(
        "criterion 03 PASS: 200 oracle matches, worst deviation {worst:.1e} ({:.2} s)",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_04_lipschitz_stability() {
    let start = Instant::now();
    let mut rng = Stream::new(401, 0);
    let mut min_slack = f64::INFINITY;
    for trial in 0..500 {
        let mu = random_measure(&mut rng, 6, 2.0);
        let sub = random_submeasure(&mut rng, &mu);
        let nu = contract(&mut rng, &sub);
        if nu.is_zero() {
            continue;
        }
        // second pair with matching masses
        let mu2 = random_measure(&mut rng, 6, 2.0).normalize().scale(mu.mass());
        let rho2 = mu2.scale(nu.mass() / mu2.mass());
        let nu2 = contract(&mut rng, &rho2);

        let s1 = simple_shadow(&nu, &mu).unwrap();
        let s2 = simple_shadow(&nu2, &mu2).unwrap();
        let lhs = w1_distance(&s1, &s2).unwrap();
        let rhs =
            w1_distance(&nu, &nu2).unwrap() + 2.0 * w1_distance(&mu, &mu2).unwrap();
        let slack = rhs - lhs;
        assert!(slack >= -1e-9, "trial {trial}: inequality violated by {slack:.3e}");
        min_slack = min_slack.min(slack);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
    println!(
        "criterion 04 PASS: 500 stability trials, min slack {min_slack:.3e} ({:.2} s)",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_05_calculus_laws() {
    let mut rng = Stream::new(501, 0);

    // associativity through random chains
    for trial in 0..200 {
        let p = random_peacock(&mut rng, 4, 2);
        let sub = random_submeasure(&mut rng, p.initial());
        let nu = contract(&mut rng, &sub);
        let f = rng.range(0.0, 1.0);
        let nu1 = nu.scale(f);
        let nu2 = nu.subtract(&nu1).unwrap();
        let report = shadow_associativity_check(&nu1, &nu2, p.marginals()).unwrap();
        assert!(
            report.max_deviation <= 1e-9,
            "associativity trial {trial}: deviation {:.3e}",
            report.max_deviation
        );
    }

    // homogeneity
    for trial in 0..200 {
        let p = random_peacock(&mut rng, 4, 2);
        let sub = random_submeasure(&mut rng, p.initial());
        let nu = contract(&mut rng, &sub);
        if nu.is_zero() {
            continue;
        }
        let c = rng.range(0.05, 4.0);
        let report = shadow_homogeneity_check(&nu, p.marginals(), c).unwrap();
        assert!(
            report.max_deviation <= 1e-9,
            "homogeneity trial {trial}: deviation {:.3e}",
            report.max_deviation
        );
    }

    // monotonicity: <=_c, <=_+, <=_{c,s}, for simple and obstructed shadows
    let mut done = [0usize; 3];
    while done.iter().any(|&d| d < 200) {
        let p = random_peacock(&mut rng, 4, 2);
        let chain = p.marginals();
        let sub = random_submeasure(&mut rng, p.initial());
        let hi = contract(&mut rng, &sub);
        if hi.is_zero() {
            continue;
        }

        // <=_c pair
        if done[0] < 200 {
            let lo = contract(&mut rng, &hi);
            let (s_lo, s_hi) = (
                simple_shadow(&lo, &chain[chain.len() - 1]).unwrap(),
                simple_shadow(&hi, &chain[chain.len() - 1]).unwrap(),
            );
            assert!(check_convex_order(&s_lo, &s_hi), "<=_c simple");
            let (o_lo, o_hi) = (
                obstructed_shadow(&lo, chain).unwrap(),
                obstructed_shadow(&hi, chain).unwrap(),
            );
            assert!(check_convex_order(&o_lo, &o_hi), "<=_c obstructed");
            done[0] += 1;
        }

        // <=_+ pair
        if done[1] < 200 {
            let lo = random_submeasure(&mut rng, &hi);
            let (s_lo, s_hi) = (
                simple_shadow(&lo, &chain[chain.len() - 1]).unwrap(),
                simple_shadow(&hi, &chain[chain.len() - 1]).unwrap(),
            );
            assert!(check_positive_order(&s_lo, &s_hi), "<=_+ simple");
            let (o_lo, o_hi) = (
                obstructed_shadow(&lo, chain).unwrap(),
                obstructed_shadow(&hi, chain).unwrap(),
            );
            assert!(check_positive_order(&o_lo, &o_hi), "<=_+ obstructed");
            done[1] += 1;
        }

        // <=_{c,s} pair: contract, then shift left a little
        if done[2] < 200 {
            let shifted = Measure::from_atoms(
                contract(&mut rng, &hi)
                    .atoms()
                    .iter()
                    .map(|&(x, w)| (x - rng.range(0.0, 0.05), w))
                    .collect(),
            );
            if check_cs_order(&shifted, &hi)
                && chain.iter().all(|mu| check_c_plus_order(&shifted, mu))
            {
                let (s_lo, s_hi) = (
                    simple_shadow(&shifted, &chain[chain.len() - 1]).unwrap(),
                    simple_shadow(&hi, &chain[chain.len() - 1]).unwrap(),
                );
                assert!(check_cs_order(&s_lo, &s_hi), "<=_{{c,s}} simple");
                let (o_lo, o_hi) = (
                    obstructed_shadow(&shifted, chain).unwrap(),
                    obstructed_shadow(&hi, chain).unwrap(),
                );
                assert!(check_cs_order(&o_lo, &o_hi), "<=_{{c,s}} obstructed");
                done[2] += 1;
            }
        }
    }
    println!("criterion 05 PASS: associativity, homogeneity, 3x monotonicity, 200 trials each");
}

#[test]
fn criterion_06_sun_example_end_to_end() {
    let start = Instant::now();
    let p = sun_mixture_peacock(3);
    let param = Parametrization::sunset(p.initial().clone()).unwrap();
    let (mx, table) = build_with_table(&p, &param, &[0.0, 0.5, 1.0]).unwrap();

    // slice marginals are exactly ½Law(S_n) and ½Law(3S_n)
    for (n, marg) in mx.slices[0].marginals.iter().enumerate() {
        let dev = marg.max_deviation(&walk_law(n as u32, 1.0).scale(0.5));
        assert!(dev < 1e-15, "slice 0 marginal n={n}: deviation {dev:.2e}");
    }
    for (n, marg) in mx.slices[1].marginals.iter().enumerate() {
        let dev = marg.max_deviation(&walk_law(n as u32, 3.0).scale(0.5));
        assert!(dev < 1e-15, "slice 1 marginal n={n}: deviation {dev:.2e}");
    }

    assert!(mx.non_binomial_links().is_empty(), "all links binomial");
    let dev = verify_marginals(&mx, &table).unwrap();
    assert!(dev < 1e-12, "marginal deviation {dev:.3e}");
    let audit = verify_martingale(&mx).unwrap();
    assert_eq!(audit.max_kernel_barycenter_error, 0.0);

    // 10^5 paths: per-path increments all ±1 or all ±3
    let n_paths = 100_000;
    let paths = sample(&mx, n_paths, 64, false).unwrap();
    let mut empirical: Vec<Vec<(f64, f64)>> = vec![Vec::new(); p.len()];
    for path in &paths {
        let step = if path.slice == 0 { 1.0 } else { 3.0 };
        for w in path.values.windows(2) {
            let inc = (w[1] - w[0]).abs();
            assert!(
                (inc - step).abs() < 1e-12,
                "increment {inc} off the ±{step} lattice"
            );
        }
        for (t, &x) in path.values.iter().enumerate() {
            empirical[t].push((x, 1.0 / n_paths as f64));
        }
    }
    let mut worst_w1 = 0.0f64;
    for (t, atoms) in empirical.into_iter().enumerate() {
        let emp = Measure::from_atoms(atoms);
        let d = w1_distance(&emp, &p.marginals()[t]).unwrap();
        worst_w1 = worst_w1.max(d);
        assert!(d <= 0.02, "empirical marginal at t={t}: W1 {d:.4}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!(
        "criterion 06 PASS: exact slices, binomial links, 10^5 paths, worst empirical W1 {worst_w1:.4} ({:.2} s)",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_07_msm_optimality() {
    let start = Instant::now();
    let mut rng = Stream::new(701, 0);

    // 2-time instances: LP value vs left-curtain build coupling cost
    let mut worst2 = 0.0f64;
    for trial in 0..50 {
        let n_atoms = 3 + rng.below(2);
        let mu0 = distinct_atoms(&mut rng, n_atoms, 1.2);
        let once = spread(&mut rng, &mu0);
        let mu1 = spread(&mut rng, &once);
        let p = Peacock::new(vec![0.0, 1.0], vec![mu0.clone(), mu1.clone()]).unwrap();
        let param = Parametrization::left_curtain(mu0.clone()).unwrap();
        let mx = build(&p, &param, &default_alpha_grid(&param, 1)).unwrap();
        let build_cost = mx.pair_cost(1, |x, y| MsmCost::Cubic.eval(x, y)).unwrap();
        let (lp_value, _) = mot_lp(&mu0, &mu1, &MsmCost::Cubic).unwrap();
        let gap = (build_cost - lp_value).abs();
        assert!(gap < 1e-7, "trial {trial}: build {build_cost} vs LP {lp_value}");
        worst2 = worst2.max(gap);
    }

    // 3-time instances: multistep LP agrees at (X0,X1) and (X0,X2)
    let mut worst3 = 0.0f64;
    for trial in 0..10 {
        let mu0 = distinct_atoms(&mut rng, 3, 1.0);
        let mu1 = spread(&mut rng, &mu0);
        let mu2 = spread(&mut rng, &mu1);
        let p = Peacock::new(vec![0.0, 1.0, 2.0], vec![mu0.clone(), mu1, mu2]).unwrap();
        let param = Parametrization::left_curtain(mu0).unwrap();
        let mx = build(&p, &param, &default_alpha_grid(&param, 1)).unwrap();
        for target in [1usize, 2] {
            let build_cost = mx
                .pair_cost(target, |x, y| MsmCost::Cubic.eval(x, y))
                .unwrap();
            let (lp_value, _) = mot_lp_multistep(&p, &MsmCost::Cubic, target).unwrap();
            let gap = (build_cost - lp_value).abs();
            assert!(
                gap < 1e-6,
                "trial {trial} target {target}: build {build_cost} vs LP {lp_value}"
            );
            worst3 = worst3.max(gap);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60 s");
    println!(
        "criterion 07 PASS: 50 two-time (worst gap {worst2:.1e}) + 10 three-time (worst gap {worst3:.1e}) ({:.2} s)",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_08_cuv_minimality_over_vertices() {
    let mut rng = Stream::new(801, 0);
    let mut vertex_total = 0usize;
    for trial in 0..10 {
        let n_atoms = 2 + rng.below(2);
        let mu0 = distinct_atoms(&mut rng, n_atoms, 1.0);
        let lo = mu0.atoms().first().unwrap().0 - rng.range(0.3, 1.0);
        let hi = mu0.atoms().last().unwrap().0 + rng.range(0.3, 1.0);
        let targets = vec![lo, (lo + hi) / 2.0 + rng.range(-0.2, 0.2), hi];
        let kernel = peacock_core::dilation::DilationKernel::new(targets).unwrap();
        let mu1 = kernel.push_forward(&mu0).unwrap();
        assert!(mu0.atoms().len() <= 3 && mu1.atoms().len() <= 3);

        let vertices = martingale_polytope_vertices(&mu0, &mu1).unwrap();
        assert!(!vertices.is_empty());
        vertex_total += vertices.len();
        let lc = left_curtain_coupling(&mu0, &mu1).unwrap();

        let span_lo = lo - 0.5;
        let span_hi = hi + 0.5;
        for iu in 0..11 {
            for iv in 0..11 {
                let u = span_lo + (span_hi - span_lo) * iu as f64 / 10.0;
                let v = span_lo + (span_hi - span_lo) * iv as f64 / 10.0;
                let lc_val = c_uv_expectation(&lc, u, v);
                for (vi, vert) in vertices.iter().enumerate() {
                    let vv = c_uv_expectation(vert, u, v);
                    assert!(
                        lc_val <= vv + 1e-9,
                        "trial {trial} vertex {vi} at (u,v)=({u},{v}): {lc_val} > {vv}"
                    );
                }
            }
        }
    }
    println!(
        "criterion 08 PASS: left-curtain c_uv minimal over {vertex_total} polytope vertices on 11x11 grids"
    );
}

#[test]
fn criterion_09_uniform_peacock_curve_confinement() {
    // KNOWN RED. Trajectory values hug the two curves at the discretization
    // scale and the deviation shrinks well over 3x per 4x refinement, but
    // the stated per-value bound (1+t)/m is exceeded by a factor >= ~2.2
    // at every m: the curve anchored at the path's bucket-center X₀ sits up
    // to (2+t)/(2m) (the image of the bucket's quantile range) plus the
    // half-bucket (1+t)/m away from the nearest atom of the slice marginal,
    // so max deviation approaches (4+3t)/(2m) > (1+t)/m for all t > 0,
    // independent of m and of any α-grid refinement.
    let start = Instant::now();
    let times = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    let mut deviations = Vec::new();
    let mut worst_case: Option<(usize, f64, f64, f64)> = None;
    for &m_buckets in &[16usize, 64, 256] {
        let marginals: Vec<Measure> = times
            .iter()
            .map(|&t| {
                discretize(
                    &DistributionSpec::Uniform {
                        lo: -1.0 - t,
                        hi: 1.0 + t,
                    },
                    m_buckets,
                )
                .unwrap()
            })
            .collect();
        let p = Peacock::new(times.clone(), marginals).unwrap();
        let param = Parametrization::left_curtain(p.initial().clone()).unwrap();
        let grid = default_alpha_grid(&param, 1);
        let mx = build(&p, &param, &grid).unwrap();
        let paths = sample(&mx, 1000, 901, true).unwrap();
        let mut worst = 0.0f64;
        for path in &paths {
            let x0 = path.values[0];
            for (i, &x) in path.values.iter().enumerate().skip(1) {
                let t = times[i];
                let c_minus = -1.0 - (x0 + 1.0) / 2.0 * t;
                let c_plus = x0 + (x0 + 1.0) / 2.0 * t;
                let dist = (x - c_minus).abs().min((x - c_plus).abs());
                if dist > worst {
                    worst = dist;
                    let bound = (1.0 + t) / m_buckets as f64 + 1e-9;
                    if dist > bound {
                        worst_case = Some((m_buckets, t, dist, bound));
                    }
                }
            }
        }
        deviations.push(worst);
    }
    let elapsed = start.elapsed();
    println!(
        "criterion 09: max curve deviations {:.4}/{:.4}/{:.4} at m=16/64/256 \
         (shrink {:.1}x and {:.1}x per 4x refinement), {:.2} s",
        deviations[0],
        deviations[1],
        deviations[2],
        deviations[0] / deviations[1],
        deviations[1] / deviations[2],
        elapsed.as_secs_f64()
    );

    // the refinement clause holds with margin
    assert!(deviations[1] <= deviations[0] / 3.0);
    assert!(deviations[2] <= deviations[1] / 3.0);
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");

    // the stated per-value tolerance does not (see the decisions ledger)
    assert!(
        worst_case.is_none(),
        "criterion 09 FAIL (documented spec defect): at m={}, t={} a sampled value lies {:.4} \
         from both curves, stated bound {:.4}; the bound is unattainable for atom-anchored \
         curves — max deviation scales as (4+3t)/(2m), not (1+t)/m",
        worst_case.unwrap().0,
        worst_case.unwrap().1,
        worst_case.unwrap().2,
        worst_case.unwrap().3,
    );
    println!("criterion 09 PASS");
}

#[test]
fn criterion_10_right_derivative_marginal() {
    // the right-derivative family: marginals (1-t)δ₀ + t/2(δ₋₁+δ₁) with the
    // spread limit at t=1, discretized with an interior time next to 1
    let eps = 1e-9;
    let interior = |t: f64| {
        m(&[
            (-1.0, t / 2.0),
            (0.0, 1.0 - t),
            (1.0, t / 2.0),
        ])
    };
    let p = Peacock::new(
        vec![0.0, 0.5, 1.0 - eps, 1.0],
        vec![
            Measure::dirac(0.0, 1.0),
            interior(0.5),
            interior(1.0 - eps),
            m(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]),
        ],
    )
    .unwrap();
    let param = Parametrization::sunset(p.initial().clone()).unwrap();
    let mx = build(&p, &param, &[0.0, 0.5, 1.0]).unwrap();

    let terminal = mx.slices[1].marginals.last().unwrap();
    let expected = m(&[(0.0, 0.25), (-2.0, 0.125), (2.0, 0.125)]);
    let dev = terminal.max_deviation(&expected);
    assert!(dev <= 1e-9, "slice [1/2,1] terminal deviation {dev:.3e}");
    println!("criterion 10 PASS: slice [1/2,1] terminal marginal matches, deviation {dev:.1e}");
}

#[test]
fn criterion_11_cs_convexity_of_builtin_parametrizations() {
    let mut rng = Stream::new(1101, 0);
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    for trial in 0..20 {
        let base = random_probability(&mut rng, 6, 2.0);
        for param in [
            Parametrization::left_curtain(base.clone()).unwrap(),
            Parametrization::sunset(base.clone()).unwrap(),
            Parametrization::middle_curtain(base.clone()).unwrap(),
        ] {
            let (ok, witness) = check_cs_convex(&param, &grid).unwrap();
            assert!(
                ok,
                "trial {trial}: {:?} flagged {witness:?}",
                param.kind()
            );
        }
    }
    // negative control: right curtain of the three-point base
    let thirds = m(&[(-1.0, 1.0 / 3.0), (0.0, 1.0 / 3.0), (1.0, 1.0 / 3.0)]);
    let rc = Parametrization::right_curtain(thirds).unwrap();
    let (ok, witness) = check_cs_convex(&rc, &grid).unwrap();
    assert!(!ok, "right curtain must fail");
    let w = witness.expect("violation carries a witness triple");
    println!(
        "criterion 11 PASS: 20 bases x 3 kinds cs-convex; right-curtain fails at triple {:?}",
        w.triple
    );
}

#[test]
fn criterion_12_msm_representation_identity() {
    let r200 = msm_representation_check(&MsmCost::Cubic, 2.0, 200, 7);
    assert!(r200 < 1e-3, "cubic residual {r200:.3e} at 200²");
    let r400 = msm_representation_check(&MsmCost::Cubic, 2.0, 400, 7);
    assert!(
        r400 <= r200 / 3.0,
        "refinement 200² -> 400²: {r200:.3e} -> {r400:.3e}, decrease < 3x"
    );
    println!(
        "criterion 12 PASS: cubic residual {r200:.3e} at 200², {r400:.3e} at 400² ({:.1}x decrease)",
        r200 / r400
    );
}
