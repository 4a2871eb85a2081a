use bandit_ae::edgeworth::{gaussian_density, hermite3, stage_covariance, transformed_density, Coord};
use bandit_ae::linalg::{Mat3, Vec3};
use bandit_ae::quadrature::{gauss_hermite, gaussian_expectation3};
use bandit_ae::{ExpansionMeasure64, ExpansionOrder, HermiteIndex, MomentSet64, NoiseModel64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NODES: usize = 20;

fn random_instance(rng: &mut ChaCha8Rng) -> ExpansionMeasure64 {
    loop {
        let n = rng.random_range(20..=80);
        let c = rng.random_range(5..=n - 5);
        let noise = if rng.random_bool(0.5) {
            NoiseModel64::gamma(rng.random_range(1.5..12.0), rng.random_range(0.5..3.0)).unwrap()
        } else {
            NoiseModel64::mixture(
                rng.random_range(0.3..0.9),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.5..2.0),
                rng.random_range(1.0..4.0),
                rng.random_range(0.5..4.0),
            )
            .unwrap()
        };
        let m = noise.standardized_moments().unwrap();
        if let Ok(em) = ExpansionMeasure64::new(n, [c, n - c], m, ExpansionOrder::First, false) {
            return em;
        }
    }
}

/// `E_φ[g(Z)·ψ(Z)/φ(Z)] = ∫ g ψ`.
fn against_psi(em: &ExpansionMeasure64, g: impl Fn(&Vec3<f64>) -> f64) -> f64 {
    let v = *em.covariance();
    gaussian_expectation3(&v, NODES, |z| g(z) * em.density(z) / gaussian_density(z, &v).unwrap()).unwrap()
}

#[test]
fn mass_mean_and_covariance_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let em = random_instance(&mut rng);
        let v = *em.covariance();
        assert!((against_psi(&em, |_| 1.0) - 1.0).abs() < 1e-6);
        for i in 0..3 {
            assert!(against_psi(&em, |z| z[i]).abs() < 1e-6);
            for j in 0..3 {
                let m = against_psi(&em, |z| z[i] * z[j]);
                assert!((m - v.m[i][j]).abs() < 1e-6, "({i},{j}): {m} vs {}", v.m[i][j]);
            }
        }
    }
}

#[test]
fn transformed_density_keeps_mass() {
    let m = NoiseModel64::gamma(3.0, 2.0).unwrap().standardized_moments().unwrap();
    let em = ExpansionMeasure64::new(50, [20, 30], m, ExpansionOrder::First, false).unwrap();
    let sigma = 2.0;
    let d = [1.0 / sigma, 1.0 / sigma, 1.0 / (sigma * sigma)];
    let mut vy = *em.covariance();
    for i in 0..3 {
        for j in 0..3 {
            vy.m[i][j] *= d[i] * d[j];
        }
    }
    let mass = gaussian_expectation3(&vy, NODES, |y| {
        transformed_density(y, &em, sigma).unwrap() / gaussian_density(y, &vy).unwrap()
    })
    .unwrap();
    assert!((mass - 1.0).abs() < 1e-6, "{mass}");
}

fn random_spd(rng: &mut ChaCha8Rng) -> Mat3<f64> {
    let mut a = Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            a.m[i][j] = rng.random_range(-1.0..1.0);
        }
    }
    a.mul(&a.transpose()).add(&Mat3::identity().scale(0.5))
}

fn step(z: &Vec3<f64>, axis: usize, h: f64) -> Vec3<f64> {
    let mut out = *z;
    out[axis] += h;
    out
}

/// Nested central differences for `∂_a ∂_b ∂_c f`.
fn third_difference(f: &dyn Fn(&Vec3<f64>) -> f64, z: &Vec3<f64>, idx: [usize; 3], h: f64) -> f64 {
    let d1 = |z: &Vec3<f64>| (f(&step(z, idx[2], h)) - f(&step(z, idx[2], -h))) / (2.0 * h);
    let d2 = |z: &Vec3<f64>| (d1(&step(z, idx[1], h)) - d1(&step(z, idx[1], -h))) / (2.0 * h);
    (d2(&step(z, idx[0], h)) - d2(&step(z, idx[0], -h))) / (2.0 * h)
}

#[test]
fn hermite_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let coords = [Coord::Arm1, Coord::Arm2, Coord::Square];
    for _ in 0..20 {
        let v = random_spd(&mut rng);
        let z = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
        let idx = [rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..3)];
        let phi = |x: &Vec3<f64>| gaussian_density(x, &v).unwrap();
        let h = 2e-3;
        // Richardson step removes the O(h²) term
        let fd = (4.0 * third_difference(&phi, &z, idx, h / 2.0) - third_difference(&phi, &z, idx, h)) / 3.0;
        let from_fd = -fd / phi(&z);
        let exact = hermite3(&z, &v, HermiteIndex(idx.map(|i| coords[i]))).unwrap();
        assert!(
            (from_fd - exact).abs() <= 1e-5 * exact.abs().max(1.0),
            "{idx:?}: {from_fd} vs {exact}"
        );
    }
}

/// Third cumulants of `(ż₁, ż₂, z̈)` from first principles, as a full tensor.
fn cumulant_tensor(counts: [usize; 2], n: usize, m: &MomentSet64) -> [[[f64; 3]; 3]; 3] {
    let nf = n as f64;
    let mut k = [[[0.0; 3]; 3]; 3];
    for idx in 0..27 {
        let (a, b, c) = (idx / 9, (idx / 3) % 3, idx % 3);
        let arms: Vec<usize> = [a, b, c].into_iter().filter(|&i| i < 2).collect();
        if arms.iter().any(|&i| i != arms[0]) && !arms.is_empty() {
            continue;
        }
        let squares = 3 - arms.len();
        k[a][b][c] = match squares {
            0 => m.mu3 / (counts[arms[0]] as f64).sqrt(),
            1 => (m.mu4 - 1.0) / nf.sqrt(),
            2 => (counts[arms[0]] as f64).sqrt() / nf * (m.mu5 - 2.0 * m.mu3),
            _ => (m.mu6 - 3.0 * m.mu4 + 2.0) / nf.sqrt(),
        };
    }
    k
}

fn inverse3(v: &Mat3<f64>) -> [[f64; 3]; 3] {
    let a = &v.m;
    let cof = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]
    };
    let det = a[0][0] * cof(0, 0) + a[0][1] * cof(0, 1) + a[0][2] * cof(0, 2);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[j][i] = cof(i, j) / det;
        }
    }
    out
}

#[test]
fn density_matches_independent_assembly() {
    let m = NoiseModel64::gamma(3.0, 2.0).unwrap().standardized_moments().unwrap();
    let (n, counts) = (50, [25, 25]);
    let em = ExpansionMeasure64::new(n, counts, m, ExpansionOrder::First, false).unwrap();
    let z = [1.0, -1.0, 0.5];

    let v = stage_covariance(counts, n, &m).unwrap();
    let p = inverse3(&v);
    let zeta: Vec<f64> = (0..3).map(|i| (0..3).map(|j| p[i][j] * z[j]).sum()).collect();
    let det = v.det();
    let quad: f64 = (0..3).map(|i| zeta[i] * z[i]).sum();
    let phi = (-0.5 * quad).exp() / ((2.0 * std::f64::consts::PI).powi(3) * det).sqrt();
    // −∂a −∂b −∂c φ = (ζaζbζc − ζa Pbc − ζb Pac − ζc Pab) φ
    let k = cumulant_tensor(counts, n, &m);
    let mut corr = 1.0;
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                let h = zeta[a] * zeta[b] * zeta[c] - zeta[a] * p[b][c] - zeta[b] * p[a][c] - zeta[c] * p[a][b];
                corr += k[a][b][c] * h / 6.0;
            }
        }
    }
    let oracle = phi * corr;
    assert!((em.density(&z) - oracle).abs() < 1e-10, "{} vs {oracle}", em.density(&z));
}

#[test]
fn normal_noise_arm_marginal_is_standard_normal() {
    let m = MomentSet64::gaussian();
    let em = ExpansionMeasure64::new(50, [18, 32], m, ExpansionOrder::First, false).unwrap();
    let (t, w) = gauss_hermite(NODES);
    for z in [[0.0, 0.0], [1.0, -0.5], [-2.0, 1.5], [0.3, 2.2]] {
        // z̈ ~ N(0, 2) weight: substitute z̈ = 2u
        let marginal: f64 = t
            .iter()
            .zip(&w)
            .map(|(&u, &wu)| {
                let zz = 2.0 * u;
                wu * em.density(&[z[0], z[1], zz]) * 2.0 * (u * u).exp()
            })
            .sum();
        let target = (-(z[0] * z[0] + z[1] * z[1]) / 2.0).exp() / (2.0 * std::f64::consts::PI);
        assert!((marginal - target).abs() < 1e-12, "{z:?}: {marginal} vs {target}");
    }
}
