//! Distances, Hellinger transforms and stationary laws on finite spaces.

use bayes_limits::measures::{
    alpha_grid, hellinger, hellinger_transform, hellinger_transform_min, kl_divergence, stationary_distribution,
    stationary_residual, total_variation, FiniteDist, TransitionMatrix,
};

fn main() -> bayes_limits::Result<()> {
    let p = FiniteDist::new(vec![0.5, 0.3, 0.2])?;
    let q = FiniteDist::new(vec![0.2, 0.3, 0.5])?;
    println!("Hellinger       {:.6}", hellinger(&p, &q)?);
    println!("total variation {:.6}", total_variation(&p, &q)?);
    println!("KL(p, q)        {:.6}", kl_divergence(&p, &q)?);
    println!("psi(p, q; 1/2)  {:.6}", hellinger_transform(&p, &q, 0.5)?);
    let (alpha, value) = hellinger_transform_min(&p, &q, &alpha_grid())?;
    println!("min psi over the alpha grid {value:.6} at alpha = {alpha}");

    let t = TransitionMatrix::new(vec![vec![0.1, 0.45, 0.45], vec![0.3, 0.4, 0.3], vec![0.6, 0.2, 0.2]])?;
    let pi = stationary_distribution(&t, 1e-14)?;
    println!(
        "stationary law {:?}, residual {:.2e}",
        pi.probs(),
        stationary_residual(&t, pi.probs())
    );
    Ok(())
}
