//! Seeded instance generators shared by the property and acceptance suites.
#![allow(dead_code)]

use peacock_core::dilation::DilationKernel;
use peacock_core::measure::Measure;
use peacock_core::rng::Stream;
use peacock_core::shadow::Peacock;

/// Random atomic measure: 1..=max_atoms atoms in `[-span, span]`, weights
/// in (0.1, 1.1), positions separated by at least ~1e-3.
pub fn random_measure(rng: &mut Stream, max_atoms: usize, span: f64) -> Measure {
    let n = 1 + rng.below(max_atoms);
    let atoms = (0..n)
        .map(|_| {
            let x = (rng.range(-span, span) * 500.0).round() / 500.0;
            (x, rng.range(0.1, 1.1))
        })
        .collect();
    Measure::from_atoms(atoms)
}

/// Random probability measure with the same support profile.
pub fn random_probability(rng: &mut Stream, max_atoms: usize, span: f64) -> Measure {
    random_measure(rng, max_atoms, span).normalize()
}

/// Probability measure with exactly `n` distinct atoms.
pub fn distinct_atoms(rng: &mut Stream, n: usize, span: f64) -> Measure {
    let mut m = Measure::zero();
    while m.atoms().len() < n {
        let x = (rng.range(-span, span) * 200.0).round() / 200.0;
        m = m.add(&Measure::dirac(x, rng.range(0.2, 1.0)));
    }
    m.normalize()
}

/// Random submeasure: each atom keeps a random fraction of its weight.
pub fn random_submeasure(rng: &mut Stream, mu: &Measure) -> Measure {
    Measure::from_atoms(
        mu.atoms()
            .iter()
            .map(|&(x, w)| (x, w * rng.range(0.05, 1.0)))
            .collect(),
    )
}

/// Contraction toward the barycenter: the result is `<=_c` the input.
pub fn contract(rng: &mut Stream, nu: &Measure) -> Measure {
    let Some(bary) = nu.barycenter() else {
        return nu.clone();
    };
    let lambda = rng.range(0.0, 1.0);
    nu.scale(1.0 - lambda)
        .add(&Measure::dirac(bary, lambda * nu.mass()))
}

/// Martingale spread: every atom splits symmetrically; the result is
/// `>=_c` the input with the same mass and moment.
pub fn spread(rng: &mut Stream, nu: &Measure) -> Measure {
    let mut atoms = Vec::with_capacity(nu.atoms().len() * 2);
    for &(x, w) in nu.atoms() {
        if rng.next_f64() < 0.7 {
            let d = rng.range(0.05, 0.8);
            atoms.push((x - d, w / 2.0));
            atoms.push((x + d, w / 2.0));
        } else {
            atoms.push((x, w));
        }
    }
    Measure::from_atoms(atoms)
}

/// A pair `ν <=_{c,+} µ`: a submeasure of `µ`, contracted.
pub fn random_c_plus_pair(rng: &mut Stream, max_atoms: usize, span: f64) -> (Measure, Measure) {
    let mu = random_measure(rng, max_atoms, span);
    let sub = random_submeasure(rng, &mu);
    let nu = contract(rng, &sub);
    (nu, mu)
}

/// A peacock of `steps + 1` marginals grown by martingale spreads.
pub fn random_peacock(rng: &mut Stream, max_atoms: usize, steps: usize) -> Peacock {
    let mut marginals = vec![random_probability(rng, max_atoms, 2.0)];
    for _ in 0..steps {
        marginals.push(spread(rng, marginals.last().unwrap()));
    }
    let times = (0..=steps).map(|i| i as f64).collect();
    Peacock::new(times, marginals).expect("spread chain is a peacock")
}

/// A peacock whose marginals are iterated Kellerer push-forwards; finite
/// NSI by construction.
pub fn random_nsi_peacock(rng: &mut Stream, max_atoms: usize, steps: usize) -> Peacock {
    let mut marginals = vec![random_probability(rng, max_atoms, 1.5)];
    for _ in 0..steps {
        let prev = marginals.last().unwrap();
        let lo = prev.atoms().first().unwrap().0 - rng.range(0.1, 1.0);
        let hi = prev.atoms().last().unwrap().0 + rng.range(0.1, 1.0);
        let mut targets = vec![lo, hi];
        for _ in 0..(1 + rng.below(3)) {
            targets.push(rng.range(lo, hi));
        }
        let kernel = DilationKernel::new(targets).unwrap();
        marginals.push(kernel.push_forward(prev).unwrap());
    }
    let times = (0..=steps).map(|i| i as f64).collect();
    Peacock::new(times, marginals).expect("push-forward chain is a peacock")
}

/// Law of the scaled simple random walk `scale · S_n`.
pub fn walk_law(n: u32, scale: f64) -> Measure {
    let mut atoms = Vec::new();
    for k in 0..=n {
        let binom = (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64);
        atoms.push((
            (2.0 * k as f64 - n as f64) * scale,
            binom / 2f64.powi(n as i32),
        ));
    }
    Measure::from_atoms(atoms)
}

/// The sun-mixture peacock `½ Law(S_n) + ½ Law(3 S_n)`, n = 0..=steps.
pub fn sun_mixture_peacock(steps: u32) -> Peacock {
    let times = (0..=steps).map(|n| n as f64).collect();
    let marginals = (0..=steps)
        .map(|n| walk_law(n, 1.0).scale(0.5).add(&walk_law(n, 3.0).scale(0.5)))
        .collect();
    Peacock::new(times, marginals).unwrap()
}

/// The three-point obstruction example on three times:
/// `δ₀, ½(δ₋₁+δ₁), ½δ₀+¼(δ₋₂+δ₂)`.
pub fn three_point_peacock() -> Peacock {
    Peacock::new(
        vec![0.0, 1.0, 2.0],
        vec![
            Measure::dirac(0.0, 1.0),
            Measure::from_atoms(vec![(-1.0, 0.5), (1.0, 0.5)]),
            Measure::from_atoms(vec![(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]),
        ],
    )
    .unwrap()
}
