use super::params::ParamStore;

/// Heavy-ball SGD: `v ← momentum·v + grad`, `w ← w − lr·v` for every slot.
pub fn sgd_step(params: &mut ParamStore, lr: f64, momentum: f64) {
    for i in 0..params.slots().len() {
        let slot = params.slot_mut(i);
        let v = slot.momentum.as_mut_slice();
        let g = slot.grad.as_slice();
        let w = slot.value.as_mut_slice();
        for ((wk, vk), gk) in w.iter_mut().zip(v.iter_mut()).zip(g) {
            *vk = momentum * *vk + gk;
            *wk -= lr * *vk;
        }
    }
}
