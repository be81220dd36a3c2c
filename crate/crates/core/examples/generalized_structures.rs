//! Structures induced on the generalized tangent bundle by a random compatible pair.

use metallic_lab::genbundle::{
    build_jc, build_jm, build_jp, check_anti_pseudo_calibrated, check_calibrated, ghat_matrix, neutral_metric_g,
};
use metallic_lab::metallic::{random_compatible_pair, MetallicParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let params = MetallicParams::GOLDEN;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pair = random_compatible_pair(3, params, &mut rng).unwrap();
    let tol = 1e-10;

    let jm = build_jm(&pair.j, &pair.g, tol).unwrap();
    let jp = build_jp(&pair.j, &pair.g, tol).unwrap();
    let jc = build_jc(&pair.j, &pair.g, tol).unwrap();
    println!("|J_m^2 - pJ_m - qI| = {:.2e}", jm.metallic_residual(params));
    println!("|J_p^2 - I|         = {:.2e}", jp.square_residual(1.0));
    println!("|J_c^2 + I|         = {:.2e}", jc.square_residual(-1.0));
    println!("|J_c J_p + J_p J_c| = {:.2e}", (jc.matrix() * jp.matrix() + jp.matrix() * jc.matrix()).amax());
    println!("g-hat symmetry of J_m: {:.2e}", ghat_matrix(&pair.g).unwrap().symmetry_residual(&jm));

    let g = neutral_metric_g(&jp).unwrap();
    println!("G(s, t) = (s, J_p t): signature {:?}, eigenvalues {:.4?}", g.signature, g.eigenvalues);
    println!("{:?}", check_anti_pseudo_calibrated(&jp, tol));
    println!("{:?}", check_calibrated(&jc, tol));
}
