//! Sinc kernel, its spectrum, and the mid-point approximation of a
//! generalised sinc kernel.

use blgp::kernels::{gsk_approx, sinc_kernel, KernelSpec, SincParams, SpectralEnvelope};

fn main() -> blgp::Result<()> {
    let p = SincParams::new(1.0, 0.5, 0.2)?;
    let k = KernelSpec::Sinc(p);
    println!("tau     K(tau)");
    for i in 1..7 {
        let tau = i as f64 * 1.3;
        println!("{tau:<7.1} {:+.6}", k.eval(tau));
    }
    println!("PSD at 0.5: {:.3}, at 0.7: {:.3}", k.psd(0.5), k.psd(0.7));

    // A flat envelope reproduces the sinc kernel for any number of cells.
    let flat = SpectralEnvelope::constant(1.0)?;
    for n in [1, 4, 64] {
        let err = (gsk_approx(&p, &flat, n, 3.3)? - sinc_kernel(&p, 3.3)).abs();
        println!("flat envelope, {n:>2} cells: error {err:.1e}");
    }

    let tent = KernelSpec::generalised_sinc(p, SpectralEnvelope::triangular(2.0, 0.5, 0.1)?, 32)?;
    println!(
        "tent envelope: variance {:.4}, K(2) {:+.4}",
        tent.variance(),
        tent.eval(2.0)
    );
    println!("{}", serde_json::to_string(&tent)?);
    Ok(())
}
