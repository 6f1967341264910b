// debug binary instance where descent stalls
use unique_info::sampling::sample_uniform;
use unique_info::solver::{solve_all_binary, solve_generic, SolveOptions, AllBinaryParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let opts = SolveOptions { restarts: 2, ..Default::default() };
    for i in 0..25 {
        let p = sample_uniform((2, 2, 2), &mut rng);
        let closed = solve_all_binary(&p).unwrap();
        match solve_generic(&p, &opts) {
            Ok(g) => {
                let diff = (closed.ui_bits - g.ui_bits).abs();
                if diff > 1e-7 {
                    println!("sample {i}: MISMATCH closed {} generic {} params {:?}", closed.ui_bits, g.ui_bits, AllBinaryParams::from_dist(&p));
                }
            }
            Err(e) => {
                println!("sample {i}: ERR {e}");
                println!("  params {:?}", AllBinaryParams::from_dist(&p).unwrap());
                println!("  closed ui {} loc {:?}", closed.ui_bits, closed.location);
            }
        }
    }
    println!("done");
}
