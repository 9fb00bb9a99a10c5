import numpy as np

from neuromark.layers import BatchNorm


def cast_net_f64(net):
    """Promote a network's parameters and batch-norm buffers to float64 so
    end-to-end finite-difference checks run in the double-precision mode."""
    for _, p in net.params():
        p.data = p.data.astype(np.float64)
    for layer in net.net.layers:
        if isinstance(layer, BatchNorm):
            layer.state.running_mean = layer.state.running_mean.astype(np.float64)
            layer.state.running_var = layer.state.running_var.astype(np.float64)
    return net
