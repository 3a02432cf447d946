//! Analytic gradients of the full patch network against central differences
//! at steps small enough to stay between the activation kinks.

mod common;

use rand::Rng;

use common::*;
use stitchnorm::patchnet::train::loss_and_grads;

#[test]
fn every_tensor_matches_small_step_differences() {
    let (mut params, batch) = gradcheck_instance();
    let (_, grads, _) = loss_and_grads(&params, &batch, GRADCHECK_MODE, None);
    let learnable: Vec<_> = params.store.learnable().collect();
    let mut r = rng(21);
    let mut bad = Vec::new();
    for &id in &learnable {
        for _ in 0..3 {
            let e = r.gen_range(0..params.store.get(id).len());
            let analytic = grads.0[id.index()].as_ref().map_or(0.0, |g| g.data[e]);
            let ok = [1e-5, 1e-6].iter().any(|&h| {
                let numeric = central_difference(&mut params, &batch, id, e, h);
                (analytic - numeric).abs() <= 1e-4 * analytic.abs().max(numeric.abs()) + 1e-8
            });
            if !ok {
                bad.push(format!("{}[{e}]", params.store.name(id)));
            }
        }
    }
    assert!(bad.is_empty(), "mismatched coordinates: {bad:?}");
}

#[test]
fn buffers_receive_no_gradient() {
    let (params, batch) = gradcheck_instance();
    let (_, grads, _) = loss_and_grads(&params, &batch, GRADCHECK_MODE, None);
    for id in params.store.ids() {
        let learnable = params.store.learnable().any(|l| l == id);
        if !learnable {
            assert!(grads.0[id.index()].is_none(), "{}", params.store.name(id));
        }
    }
}
