//! Parameter counts of the three second-order kernel representations.
//!
//! Prints how storage grows with the memory length `n` for dense, symmetric
//! Toeplitz, and hierarchical low-rank kernels, plus the closed-form upper
//! bound for the hierarchical count with a 1x1 recursion base.
//!
//! Run with: `cargo run --release --example param_counts`

use cgsid::kernels::{param_bound_closed_form, param_count, KernelStructure};

fn main() -> cgsid::Result<()> {
    let d = 2;
    let k = 1;
    let leaf_size = 2;

    println!("second-order kernel parameter counts (rank k = {k}, leaf side {leaf_size})");
    println!();
    println!("{:>6} {:>10} {:>10} {:>14} {:>12}", "n", "toeplitz", "hier", "hier bound", "dense");
    for p in 2..=10u32 {
        let n = 1usize << p;
        let toeplitz = param_count(&KernelStructure::toeplitz_sym(n))?;
        let hier = param_count(&KernelStructure::hierarchical(d, n, k, leaf_size))?;
        let bound = param_bound_closed_form(p, d as u32, k as u64);
        let dense = param_count(&KernelStructure::dense(d, n))?;
        println!("{n:>6} {toeplitz:>10} {hier:>10} {bound:>14} {dense:>12}");
    }

    println!();
    let n = 16;
    let toeplitz = param_count(&KernelStructure::toeplitz_sym(n))?;
    let hier = param_count(&KernelStructure::hierarchical(d, n, k, leaf_size))?;
    let dense = param_count(&KernelStructure::dense(d, n))?;
    println!(
        "at n = {n} the ratio toeplitz : hier : dense is {}:{}:{} = 1:{}:{}",
        toeplitz,
        hier,
        dense,
        hier / toeplitz,
        dense / toeplitz
    );
    println!(
        "dense grows as n^2 while the hierarchical count grows as n log n,\n\
         so the gap widens with memory: at n = 1024 dense needs {}x more.",
        param_count(&KernelStructure::dense(d, 1024))?
            / param_count(&KernelStructure::hierarchical(d, 1024, k, leaf_size))?
    );
    Ok(())
}
