//! Banded/cyclic solver against an independent dense-elimination oracle.

use parcs::band::BandedMatrix;

/// Deterministic LCG so the random instances are reproducible.
struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
    }
}

/// Plain textbook Gaussian elimination with partial pivoting on a dense
/// copy; written here, independent of the crate's solvers.
fn dense_oracle(n: usize, a: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut b = rhs.to_vec();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        m.swap(k, piv);
        b.swap(k, piv);
        assert!(m[k][k].abs() > 1e-14, "oracle pivot");
        for r in k + 1..n {
            let f = m[r][k] / m[k][k];
            for c in k..n {
                m[r][c] -= f * m[k][c];
            }
            b[r] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for c in k + 1..n {
            acc -= m[k][c] * x[c];
        }
        x[k] = acc / m[k][k];
    }
    x
}

fn random_instance(
    rng: &mut Lcg,
    n: usize,
    bl: usize,
    bu: usize,
    cyclic: bool,
) -> (BandedMatrix, Vec<Vec<f64>>, Vec<f64>) {
    let mut band = BandedMatrix::new(n, bl, bu, cyclic);
    let mut dense = vec![vec![0.0; n]; n];
    for i in 0..n {
        for d in -(bl as isize)..=(bu as isize) {
            let j = i as isize + d;
            let col = if (0..n as isize).contains(&j) {
                j as usize
            } else if cyclic {
                j.rem_euclid(n as isize) as usize
            } else {
                continue;
            };
            // diagonally dominant keeps every instance well conditioned
            let v = if d == 0 { 4.0 + rng.next_f64() } else { rng.next_f64() };
            band.add(i, d, v);
            dense[i][col] += v;
        }
    }
    let rhs: Vec<f64> = (0..n).map(|_| rng.next_f64() * 3.0).collect();
    (band, dense, rhs)
}

#[test]
fn random_banded_against_dense_oracle() {
    let mut rng = Lcg(0x5eed);
    for &n in &[8usize, 16, 33, 100] {
        for &(bl, bu) in &[(1usize, 1usize), (2, 2), (3, 3), (2, 1)] {
            if n <= 2 * bl.max(bu) {
                continue;
            }
            let (band, dense, rhs) = random_instance(&mut rng, n, bl, bu, false);
            let x = band.solve(&rhs).unwrap();
            let expect = dense_oracle(n, &dense, &rhs);
            for (a, b) in x.iter().zip(&expect) {
                assert!((a - b).abs() <= 1e-10, "n={n} bl={bl} bu={bu}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn hundred_random_cyclic_systems() {
    let mut rng = Lcg(0xc0ffee);
    let sizes = [8usize, 12, 16, 24, 32, 48, 64, 96, 128, 256];
    let mut count = 0;
    'outer: for round in 0..20 {
        for &n in &sizes {
            let (bl, bu) = match round % 3 {
                0 => (1, 1),
                1 => (2, 2),
                _ => (2, 1),
            };
            let (band, dense, rhs) = random_instance(&mut rng, n, bl, bu, true);
            let x = band.solve(&rhs).unwrap();

            // residual bound required of the solver
            let ax = band.matvec(&x);
            let rn: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let res: f64 =
                ax.iter().zip(&rhs).map(|(l, r)| (l - r) * (l - r)).sum::<f64>().sqrt();
            assert!(res <= 1e-10 * (1.0 + rn), "n={n}: residual {res}");

            // and agreement with the dense oracle
            let expect = dense_oracle(n, &dense, &rhs);
            for (a, b) in x.iter().zip(&expect) {
                assert!((a - b).abs() <= 1e-10, "n={n}: {a} vs {b}");
            }
            count += 1;
            if count >= 100 {
                break 'outer;
            }
        }
    }
    assert!(count >= 100);
}
