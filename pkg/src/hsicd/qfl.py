"""Pixel-level quantum feature learning: 1x1 conv, per-pixel circuits over
channel groups of four, 1x1 conv."""
import numpy as np

from .autodiff import as_tensor, conv1x1, make, reshape


def circuit_layer(x, params, circuit, set_ids=None):
    """Run ``circuit`` on every row of ``x`` (N, q) -> (N, n_out).

    ``params`` is an (S, P) tensor of angle sets; ``set_ids`` picks the set of
    each row (all rows use set 0 when omitted).
    """
    x, params = as_tensor(x), as_tensor(params)
    out = circuit.forward(x.data, params.data, set_ids)

    def backward(g):
        gx, gp = circuit.vjp(x.data, params.data, g, set_ids)
        return gx, gp

    return make(out, (x, params), backward, "circuit")


def qfl_forward(x_diff, params, circuit):
    """(H, W, C) -> (H, W, C) through the condensed quantum stage.

    The condensed map has G*q channels; channel group g of every pixel is one
    circuit instance. With one parameter set all groups share angles, with G
    sets group g uses set g.
    """
    h, w, _ = x_diff.shape
    q = circuit.q
    z = conv1x1(x_diff, params["qfl.conv_in.kernel"], params["qfl.conv_in.bias"])
    groups = z.shape[-1] // q
    qparams = params["qfl.quantum"]
    set_ids = None
    if qparams.shape[0] > 1:
        set_ids = np.tile(np.arange(groups), h * w)
    feats = circuit_layer(reshape(z, (h * w * groups, q)), qparams, circuit, set_ids)
    feats = reshape(feats, (h, w, groups * circuit.n_out))
    return conv1x1(feats, params["qfl.conv_out.kernel"], params["qfl.conv_out.bias"])


def quantum_stage(x_diff, params, circuit):
    """The circuit outputs of :func:`qfl_forward` before the restoring conv (numpy)."""
    h, w, _ = x_diff.shape
    z = conv1x1(x_diff, params["qfl.conv_in.kernel"], params["qfl.conv_in.bias"]).data
    groups = z.shape[-1] // circuit.q
    qp = params["qfl.quantum"].data
    set_ids = np.tile(np.arange(groups), h * w) if qp.shape[0] > 1 else None
    out = circuit.forward(z.reshape(-1, circuit.q), qp, set_ids)
    return out.reshape(h, w, groups * circuit.n_out)
