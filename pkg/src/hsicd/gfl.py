"""Superpixel-level feature learning with graph attention layers."""
import numpy as np

from .autodiff import Tensor, concat, elu, leaky_relu, make, masked_softmax, matmul, reshape, transpose


def neighbourhood_mask(adjacency):
    """Closed first-order neighbourhoods: adjacency plus self loops."""
    a = np.asarray(adjacency) > 0
    return a | np.eye(a.shape[0], dtype=bool)


def gat_attention(v, adjacency, transform, attn, slope=0.2):
    """Attention coefficients rho[i, j] for every node pair (numpy).

    ``rho[i, j]`` is the softmax over the closed neighbourhood of ``i`` of
    LeakyReLU(attn . (T v_i || T v_j)); entries outside it are 0.
    """
    h = np.asarray(v) @ np.asarray(transform)
    f = h.shape[1]
    attn = np.asarray(attn).reshape(-1)
    logits = (h @ attn[:f])[:, None] + (h @ attn[f:])[None, :]
    logits = np.where(logits < 0, slope * logits, logits)
    return masked_softmax(Tensor(logits), neighbourhood_mask(adjacency)).data


def _head(v, mask, transform, attn):
    h = matmul(v, transform)
    f = transform.shape[1]
    src = matmul(h, _attn_part(attn, 0, f))
    dst = matmul(h, _attn_part(attn, f, 2 * f))
    logits = leaky_relu(src + transpose(dst), 0.2)
    rho = masked_softmax(logits, mask)
    return matmul(rho, h)


def _attn_part(attn, start, stop):
    """Column slice attn[start:stop] as a (stop - start, 1) tensor."""
    out = attn.data[start:stop].reshape(-1, 1)

    def backward(g):
        full = np.zeros_like(attn.data)
        full[start:stop] = g.reshape(-1)
        return (full,)

    return make(out, (attn,), backward, "slice")


def gat_layer(v, adjacency, heads):
    """Multi-head graph attention: concat over heads of ELU(sum_j rho_ij T v_j).

    ``heads`` is a sequence of (transform, attention vector) tensor pairs.
    """
    mask = neighbourhood_mask(adjacency)
    outs = [elu(_head(v, mask, t, a)) for t, a in heads]
    return outs[0] if len(outs) == 1 else concat(outs, axis=1)


def graph_encode(x_pixels, graph):
    """(HW, C) pixel features -> (K, C) superpixel means."""
    return matmul(Tensor(graph.O_norm.T), x_pixels)


def graph_decode(v, graph):
    """(K, C) node features -> (HW, C), each pixel takes its node's value."""
    return matmul(Tensor(graph.O), v)


def gfl_forward(x_diff, graph, params, heads=2):
    """Encode, 2-head GAT, single-head GAT, decode; (H, W, C) -> (H, W, C)."""
    h, w, c = x_diff.shape
    v = graph_encode(reshape(x_diff, (h * w, c)), graph)
    v = gat_layer(v, graph.A, [(params[f"gfl.l1.T{n}"], params[f"gfl.l1.a{n}"]) for n in range(heads)])
    v = gat_layer(v, graph.A, [(params["gfl.l2.T"], params["gfl.l2.a"])])
    return reshape(graph_decode(v, graph), (h, w, -1))
