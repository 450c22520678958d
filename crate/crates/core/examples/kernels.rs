//! Prints the OMS centre/surround kernels and one von Mises border kernel.
//!
//! cargo run --example kernels

use bioattn::snn::{dump_kernel, gaussian_kernel, von_mises_kernel, GaussianKernelSpec, VonMisesKernelSpec};

fn main() -> bioattn::Result<()> {
    let center = gaussian_kernel(&GaussianKernelSpec::new(8, 1.0))?;
    let surround = gaussian_kernel(&GaussianKernelSpec::new(8, 4.0))?;
    println!("center, size 8, sigma 1\n{}", dump_kernel(&center));
    println!("surround, size 8, sigma 4\n{}", dump_kernel(&surround));

    let vm = von_mises_kernel(&VonMisesKernelSpec::new(4.0, 0.2, 0.0))?;
    println!("von Mises, R0 4, rho 0.2, theta 0 ({}x{})", vm.width(), vm.height());
    for y in 0..vm.height() {
        let row: String = vm.row(y).iter().map(|v| if *v > 0.5 * vm.max_value() { '#' } else if *v > 0.1 * vm.max_value() { '+' } else { '.' }).collect();
        println!("{row}");
    }
    Ok(())
}
