//! Gauss–Legendre nodes and weights on `[-1, 1]`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// `(nodes, weights)` of the `order`-point rule, nodes ascending.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let order = NonZeroUsize::new(order).expect("quadrature order must be positive");
    let mut pairs = GaussLegendre::new(order).as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
