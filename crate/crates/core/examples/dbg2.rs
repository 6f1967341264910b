use unique_info::deltap::build_spec;
use unique_info::objective::{cmi, directional_derivative};
use unique_info::sampling::sample_uniform;
use unique_info::solver::{solve_all_binary, solve_generic, SolveOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut p = None;
    for i in 0..=20 {
        let s = sample_uniform((2, 2, 2), &mut rng);
        if i == 20 { p = Some(s); }
    }
    let p = p.unwrap();
    let spec = build_spec(&p);
    let closed = solve_all_binary(&p).unwrap();
    println!("closed ui {} g {:?}", closed.ui_bits, closed.g_coords.values);
    let g = solve_generic(&p, &SolveOptions::default()).unwrap();
    println!("generic ui {} iters {} kkt {:e}", g.ui_bits, g.iterations, g.final_grad_norm);
    println!("generic g {:?}", g.g_coords.values);
    println!("generic optimizer {:?}", g.optimizer.tensor());
    println!("bounds {:?}", spec.bounds_222().unwrap());
    for t in 0..2 {
        let dd = directional_derivative(&g.optimizer, t, 0, 1, 0, 1);
        println!("deriv t={t}: {:?}", dd.value);
    }
    println!("cmi(generic opt) = {}", cmi(&g.optimizer));
}
