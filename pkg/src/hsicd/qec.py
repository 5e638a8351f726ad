"""Quantum-enhanced classifier head and the training loss."""
from dataclasses import dataclass

from .autodiff import Tensor, concat, conv1x1, masked_cross_entropy, mul, reshape, softmax
from .qfl import circuit_layer


def qec_forward(x_fuse, params, circuit):
    """Return (M, M_QNN, M_FCL), each (H, W, 2) class probabilities.

    The quantum branch embeds the 4-channel output of the first affine map per
    pixel; the classical branch is a second affine map. Their concatenation is
    reweighted by the per-pixel softmax of W and fused by the third map.
    """
    h, w, _ = x_fuse.shape
    x_fcl = conv1x1(x_fuse, params["qec.fcl2.kernel"], params["qec.fcl2.bias"])
    pre = conv1x1(x_fuse, params["qec.fcl1.kernel"], params["qec.fcl1.bias"])
    x_qnn = circuit_layer(reshape(pre, (h * w, circuit.q)), params["qec.quantum"], circuit)
    x_qnn = reshape(x_qnn, (h, w, circuit.n_out))
    weighted = mul(concat([x_qnn, x_fcl], axis=-1), softmax(params["qec.W"], axis=-1))
    m = softmax(conv1x1(weighted, params["qec.fcl3.kernel"], params["qec.fcl3.bias"]), axis=-1)
    return m, softmax(x_qnn, axis=-1), softmax(x_fcl, axis=-1)


@dataclass
class LossTerms:
    main: Tensor
    aux: Tensor
    total: Tensor

    def values(self):
        return float(self.main.data), float(self.aux.data), float(self.total.data)


def loss(m, m_qnn, m_fcl, labels, mask, use_qec=True):
    """Masked two-class cross-entropy, main + aux / 2.

    With the quantum classifier disabled only ``m_fcl`` is scored and the
    auxiliary term is zero.
    """
    if not use_qec:
        main = masked_cross_entropy(m_fcl, labels, mask)
        zero = Tensor(0.0)
        return LossTerms(main, zero, main)
    main = masked_cross_entropy(m, labels, mask)
    aux = masked_cross_entropy(m_qnn, labels, mask) + masked_cross_entropy(m_fcl, labels, mask)
    return LossTerms(main, aux, main + mul(aux, 0.5))
