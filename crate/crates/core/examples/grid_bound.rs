//! Best fidelity reachable on the action grid for a given segment count,
//! found by randomized coordinate search. Used to judge training results.

use fastgate::pulse::ActionGrid;
use fastgate::sim::{self, PwcWaveform, StateVector, TransmonParams, DEFAULT_TAU_NS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fastgate::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(10);
    let p = TransmonParams::default();
    let target = StateVector::basis(3, 1);
    let gx = ActionGrid::x_quadrature();
    let gy = ActionGrid::y_quadrature();
    let score = |s: &[[usize; 2]]| -> fastgate::Result<(f64, f64)> {
        let segs = s
            .iter()
            .map(|[i, j]| [gx.value(*i), gy.value(*j)])
            .collect();
        let u = sim::evolve(&PwcWaveform::new(segs, DEFAULT_TAU_NS, p.omega_d)?, &p)?;
        Ok((sim::fidelity(&u, &target), sim::leakage(&u)))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut overall = (0.0, 0.0, vec![]);
    for restart in 0..20 {
        let mut s: Vec<[usize; 2]> = (0..n)
            .map(|_| [rng.random_range(0..21), rng.random_range(0..21)])
            .collect();
        let mut best = score(&s)?;
        loop {
            let mut improved = false;
            for k in 0..n {
                for q in 0..2 {
                    for v in 0..21 {
                        let old = s[k][q];
                        s[k][q] = v;
                        let f = score(&s)?;
                        if f.0 > best.0 + 1e-12 {
                            best = f;
                            improved = true;
                        } else {
                            s[k][q] = old;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if best.0 > overall.0 {
            overall = (best.0, best.1, s.clone());
        }
        println!("restart {restart}: F={:.6} L={:.2e}", best.0, best.1);
    }
    println!(
        "best F={:.6} L={:.2e} {:?}",
        overall.0, overall.1, overall.2
    );
    Ok(())
}
