use deltasol::flux::Flux;
use deltasol::hopf::{Background, Datum};
use deltasol::verify::*;

fn main() {
    let datum = Datum::PeriodicRamp { base: 0.2, amp: 0.25, steep: 0.25, center: 0.0, period: 40.0 };
    let bf = Background::new(datum, Flux::quadratic());
    let g0 = 1.0; let phi0 = -3.0; let eps = 0.05; let t_end = 1.0;
    // finer resolution variant
    for (n1, n2, l) in [(8192usize, 16384usize, 40.0f64)] {
        let cfg = SpectralConfig { domain: (-l/2.0, l/2.0), n: n1, cfl: 0.4, outputs: 10 };
        let run = kdv_direct(&bf, g0, phi0, eps, t_end, &cfg).unwrap();
        let cfg2 = SpectralConfig { domain: (-l, l), n: n2, cfl: 0.4, outputs: 10 };
        let run2 = kdv_direct(&bf, g0, phi0, eps, t_end, &cfg2).unwrap();
        let mut gap = 0.0_f64;
        for (i, &t) in run.times.iter().enumerate() {
            if let Some(j) = run2.times.iter().position(|&s| (s - t).abs() < 1e-12) {
                gap = gap.max((run.peak_x[i] - run2.peak_x[j]).abs());
            }
        }
        println!("N={n1} L={l} vs doubled: gap {:.3e}", gap);
    }
    // constant background control: is the gap radiation or noise?
    let bfc = Background::new(Datum::Constant { value: 0.2 }, Flux::quadratic());
    let cfg = SpectralConfig { domain: (-20.0, 20.0), n: 4096, cfl: 0.4, outputs: 10 };
    let run = kdv_direct(&bfc, g0, phi0, eps, t_end, &cfg).unwrap();
    let cfg2 = SpectralConfig { domain: (-40.0, 40.0), n: 8192, cfl: 0.4, outputs: 10 };
    let run2 = kdv_direct(&bfc, g0, phi0, eps, t_end, &cfg2).unwrap();
    let mut gap = 0.0_f64;
    for (i, &t) in run.times.iter().enumerate() {
        if let Some(j) = run2.times.iter().position(|&s| (s - t).abs() < 1e-12) {
            gap = gap.max((run.peak_x[i] - run2.peak_x[j]).abs());
        }
    }
    println!("constant bg control gap {:.3e}", gap);
}
