"""SAM-weighted fusion of the graph and quantum branches and the two
conv3x3 / PReLU / batch-norm fusion layers."""
from .autodiff import as_tensor, batchnorm, concat, conv3x3, mul, prelu


def weighted_sum(gfl_out, qfl_out, z):
    """(gfl_out + qfl_out) scaled per pixel by the angle map ``z`` (H, W)."""
    gfl_out, qfl_out = as_tensor(gfl_out), as_tensor(qfl_out)
    z = as_tensor(z)
    if gfl_out.shape != qfl_out.shape:
        raise ValueError(f"branch shapes differ: {gfl_out.shape} vs {qfl_out.shape}")
    if z.shape != gfl_out.shape[:2]:
        raise ValueError(f"weight map {z.shape} does not match {gfl_out.shape[:2]}")
    return mul(gfl_out + qfl_out, z.reshape(z.shape + (1,)))


def ff_layer(x, params, bn_state, prefix, training=True):
    y = conv3x3(x, params[f"{prefix}.kernel"], params[f"{prefix}.bias"])
    y = prelu(y, params[f"{prefix}.slope"])
    return batchnorm(y, params[f"{prefix}.gamma"], params[f"{prefix}.beta"], bn_state[prefix], training)


def fuse(x_fea, x1_red, x2_red, z, params, bn_state, training=True):
    z = as_tensor(z)
    x = concat([x_fea, x1_red, x2_red, z.reshape(z.shape + (1,))], axis=-1)
    x = ff_layer(x, params, bn_state, "ff1", training)
    return ff_layer(x, params, bn_state, "ff2", training)
