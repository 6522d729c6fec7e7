"""Numeric kernels for the encoder-decoder LSTM.

Everything here is written against plain float64 ndarrays so the same
source runs two ways: compiled with numba when it is importable, or as
ordinary numpy when it is not.  Set ``DAXLAB_DISABLE_NUMBA=1`` to force
the numpy path (the benchmark CLI uses this to compare backends).

The training kernel fuses the forward pass, the cross-entropy loss, and
reverse accumulation through time into one call; gradients are added
into caller-provided views of a flat buffer, so the caller zeroes that
buffer once per step instead of allocating per-tensor arrays.

Weight layout conventions:

* gate order inside every ``4H`` block is input, forget, cell, output
* ``enc_Wx[l] @ x + enc_Wh[l] @ h_prev + enc_b[l]`` produces the gates
* dropout masks are inverted (values 0 or 1/(1-p)); mask slot ``l`` is
  applied to the input of layer ``l``, so slot 0 drops the embedded
  token and slots 1..L-1 drop the between-layer activations.  The top
  layer's output feeds the projection and attention undropped, and the
  recurrent state is never dropped
* the decoder starts from the encoder's final per-layer (h, c)
* attention is multiplicative: scores are ``enc_top . (Wa @ h_top)``,
  the context joins ``h_top`` through a tanh combine layer
"""

import os

import numpy as np


def _identity_njit(*args, **kwargs):
    if args and callable(args[0]):
        return args[0]

    def wrap(fn):
        return fn

    return wrap


if os.environ.get("DAXLAB_DISABLE_NUMBA") == "1":
    njit = _identity_njit
    NUMBA_ENABLED = False
else:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:
        njit = _identity_njit
        NUMBA_ENABLED = False


@njit(cache=True)
def _softmax(v):
    shifted = v - np.max(v)
    e = np.exp(shifted)
    return e / np.sum(e)


@njit(cache=True)
def _lstm_cell(Wx, Wh, b, x, h_prev, c_prev):
    H = h_prev.shape[0]
    z = np.dot(Wx, x) + np.dot(Wh, h_prev) + b
    i = 1.0 / (1.0 + np.exp(-z[0:H]))
    f = 1.0 / (1.0 + np.exp(-z[H : 2 * H]))
    g = np.tanh(z[2 * H : 3 * H])
    o = 1.0 / (1.0 + np.exp(-z[3 * H : 4 * H]))
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return i, f, g, o, c, tc, h


@njit(cache=True)
def seq_step(
    x_tokens,
    y_tokens,
    Ein,
    enc_Wx,
    enc_Wh,
    enc_b,
    Eout,
    dec_Wx,
    dec_Wh,
    dec_b,
    Wa,
    Wc,
    bc,
    Wo,
    bo,
    use_attention,
    enc_mask,
    dec_mask,
    teacher_force,
    sos_id,
    compute_grads,
    gEin,
    genc_Wx,
    genc_Wh,
    genc_b,
    gEout,
    gdec_Wx,
    gdec_Wh,
    gdec_b,
    gWa,
    gWc,
    gbc,
    gWo,
    gbo,
    probs_out,
    att_out,
):
    """Mean cross-entropy over target positions; optionally accumulates
    gradients into the g* views."""
    L = enc_Wx.shape[0]
    H = Ein.shape[1]
    Tin = x_tokens.shape[0]
    Tout = y_tokens.shape[0]
    V = Wo.shape[0]

    # ---- encoder forward
    enc_x = np.zeros((L, Tin, H))
    enc_i = np.zeros((L, Tin, H))
    enc_f = np.zeros((L, Tin, H))
    enc_g = np.zeros((L, Tin, H))
    enc_o = np.zeros((L, Tin, H))
    enc_c = np.zeros((L, Tin, H))
    enc_tc = np.zeros((L, Tin, H))
    enc_h = np.zeros((L, Tin, H))
    for t in range(Tin):
        inp = Ein[x_tokens[t]] * enc_mask[0, t]
        for l in range(L):
            if t == 0:
                h_prev = np.zeros(H)
                c_prev = np.zeros(H)
            else:
                h_prev = enc_h[l, t - 1]
                c_prev = enc_c[l, t - 1]
            enc_x[l, t] = inp
            i, f, g, o, c, tc, h = _lstm_cell(
                enc_Wx[l], enc_Wh[l], enc_b[l], inp, h_prev, c_prev
            )
            enc_i[l, t] = i
            enc_f[l, t] = f
            enc_g[l, t] = g
            enc_o[l, t] = o
            enc_c[l, t] = c
            enc_tc[l, t] = tc
            enc_h[l, t] = h
            if l + 1 < L:
                inp = h * enc_mask[l + 1, t]

    # ---- decoder forward
    dec_in = np.zeros(Tout, dtype=np.int64)
    dec_x = np.zeros((L, Tout, H))
    dec_i = np.zeros((L, Tout, H))
    dec_f = np.zeros((L, Tout, H))
    dec_g = np.zeros((L, Tout, H))
    dec_o = np.zeros((L, Tout, H))
    dec_c = np.zeros((L, Tout, H))
    dec_tc = np.zeros((L, Tout, H))
    dec_h = np.zeros((L, Tout, H))
    ctxs = np.zeros((Tout, H))
    cats = np.zeros((Tout, 2 * H))
    combs = np.zeros((Tout, H))
    queries = np.zeros((Tout, H))

    loss = 0.0
    prev_pred = -1
    for t in range(Tout):
        if t == 0:
            dec_in[t] = sos_id
        elif teacher_force:
            dec_in[t] = y_tokens[t - 1]
        else:
            dec_in[t] = prev_pred
        inp = Eout[dec_in[t]] * dec_mask[0, t]
        for l in range(L):
            if t == 0:
                h_prev = enc_h[l, Tin - 1]
                c_prev = enc_c[l, Tin - 1]
            else:
                h_prev = dec_h[l, t - 1]
                c_prev = dec_c[l, t - 1]
            dec_x[l, t] = inp
            i, f, g, o, c, tc, h = _lstm_cell(
                dec_Wx[l], dec_Wh[l], dec_b[l], inp, h_prev, c_prev
            )
            dec_i[l, t] = i
            dec_f[l, t] = f
            dec_g[l, t] = g
            dec_o[l, t] = o
            dec_c[l, t] = c
            dec_tc[l, t] = tc
            dec_h[l, t] = h
            if l + 1 < L:
                inp = h * dec_mask[l + 1, t]
        top = dec_h[L - 1, t]
        if use_attention:
            q = np.dot(Wa, top)
            queries[t] = q
            scores = np.zeros(Tin)
            for s in range(Tin):
                scores[s] = np.dot(enc_h[L - 1, s], q)
            alpha = _softmax(scores)
            att_out[t, :Tin] = alpha
            ctx = np.zeros(H)
            for s in range(Tin):
                ctx += alpha[s] * enc_h[L - 1, s]
            ctxs[t] = ctx
            cat = np.zeros(2 * H)
            cat[:H] = top
            cat[H:] = ctx
            cats[t] = cat
            comb = np.tanh(np.dot(Wc, cat) + bc)
            combs[t] = comb
            logits = np.dot(Wo, comb) + bo
        else:
            logits = np.dot(Wo, top) + bo
        probs = _softmax(logits)
        probs_out[t, :] = probs
        loss -= np.log(probs[y_tokens[t]])
        best = 0
        for k in range(1, V):
            if logits[k] > logits[best]:
                best = k
        prev_pred = best
    loss /= Tout

    if not compute_grads:
        return loss

    # ---- decoder backward
    dh = np.zeros((L, H))
    dc = np.zeros((L, H))
    g_enc_top = np.zeros((Tin, H))
    inv_T = 1.0 / Tout
    for t in range(Tout - 1, -1, -1):
        dlogits = probs_out[t].copy()
        dlogits[y_tokens[t]] -= 1.0
        dlogits *= inv_T
        if use_attention:
            gWo += np.outer(dlogits, combs[t])
            gbo += dlogits
            dcomb = np.dot(Wo.T, dlogits)
            dpre = dcomb * (1.0 - combs[t] * combs[t])
            gWc += np.outer(dpre, cats[t])
            gbc += dpre
            dcat = np.dot(Wc.T, dpre)
            dtop = dcat[:H].copy()
            dctx = dcat[H:]
            alpha = att_out[t, :Tin]
            dalpha = np.zeros(Tin)
            for s in range(Tin):
                dalpha[s] = np.dot(dctx, enc_h[L - 1, s])
                g_enc_top[s] += alpha[s] * dctx
            mix = 0.0
            for s in range(Tin):
                mix += alpha[s] * dalpha[s]
            dq = np.zeros(H)
            for s in range(Tin):
                dscore = alpha[s] * (dalpha[s] - mix)
                dq += dscore * enc_h[L - 1, s]
                g_enc_top[s] += dscore * queries[t]
            gWa += np.outer(dq, dec_h[L - 1, t])
            dtop += np.dot(Wa.T, dq)
        else:
            gWo += np.outer(dlogits, dec_h[L - 1, t])
            gbo += dlogits
            dtop = np.dot(Wo.T, dlogits)
        dh[L - 1] += dtop
        for l in range(L - 1, -1, -1):
            i = dec_i[l, t]
            f = dec_f[l, t]
            g = dec_g[l, t]
            o = dec_o[l, t]
            tc = dec_tc[l, t]
            if t == 0:
                h_prev = enc_h[l, Tin - 1]
                c_prev = enc_c[l, Tin - 1]
            else:
                h_prev = dec_h[l, t - 1]
                c_prev = dec_c[l, t - 1]
            dht = dh[l]
            dct = dc[l] + dht * o * (1.0 - tc * tc)
            do = dht * tc
            di = dct * g
            dgg = dct * i
            df = dct * c_prev
            dz = np.zeros(4 * H)
            dz[0:H] = di * i * (1.0 - i)
            dz[H : 2 * H] = df * f * (1.0 - f)
            dz[2 * H : 3 * H] = dgg * (1.0 - g * g)
            dz[3 * H : 4 * H] = do * o * (1.0 - o)
            gdec_Wx[l] += np.outer(dz, dec_x[l, t])
            gdec_Wh[l] += np.outer(dz, h_prev)
            gdec_b[l] += dz
            dx = np.dot(dec_Wx[l].T, dz)
            dh[l] = np.dot(dec_Wh[l].T, dz)
            dc[l] = dct * f
            if l > 0:
                dh[l - 1] += dx * dec_mask[l, t]
            else:
                gEout[dec_in[t]] += dx * dec_mask[0, t]

    # ---- encoder backward (decoder-init grads carry over in dh/dc)
    for t in range(Tin - 1, -1, -1):
        dh[L - 1] += g_enc_top[t]
        for l in range(L - 1, -1, -1):
            i = enc_i[l, t]
            f = enc_f[l, t]
            g = enc_g[l, t]
            o = enc_o[l, t]
            tc = enc_tc[l, t]
            if t == 0:
                h_prev = np.zeros(H)
                c_prev = np.zeros(H)
            else:
                h_prev = enc_h[l, t - 1]
                c_prev = enc_c[l, t - 1]
            dht = dh[l]
            dct = dc[l] + dht * o * (1.0 - tc * tc)
            do = dht * tc
            di = dct * g
            dgg = dct * i
            df = dct * c_prev
            dz = np.zeros(4 * H)
            dz[0:H] = di * i * (1.0 - i)
            dz[H : 2 * H] = df * f * (1.0 - f)
            dz[2 * H : 3 * H] = dgg * (1.0 - g * g)
            dz[3 * H : 4 * H] = do * o * (1.0 - o)
            genc_Wx[l] += np.outer(dz, enc_x[l, t])
            genc_Wh[l] += np.outer(dz, h_prev)
            genc_b[l] += dz
            dx = np.dot(enc_Wx[l].T, dz)
            dh[l] = np.dot(enc_Wh[l].T, dz)
            dc[l] = dct * f
            if l > 0:
                dh[l - 1] += dx * enc_mask[l, t]
            else:
                gEin[x_tokens[t]] += dx * enc_mask[0, t]
    return loss


@njit(cache=True)
def greedy_decode(
    x_tokens,
    Ein,
    enc_Wx,
    enc_Wh,
    enc_b,
    Eout,
    dec_Wx,
    dec_Wh,
    dec_b,
    Wa,
    Wc,
    bc,
    Wo,
    bo,
    use_attention,
    sos_id,
    eos_id,
    max_len,
):
    """Argmax decoding until the end marker or the cap; returns the
    emitted token ids and their count."""
    L = enc_Wx.shape[0]
    H = Ein.shape[1]
    Tin = x_tokens.shape[0]
    V = Wo.shape[0]

    enc_h = np.zeros((L, Tin, H))
    enc_c = np.zeros((L, Tin, H))
    for t in range(Tin):
        inp = Ein[x_tokens[t]].copy()
        for l in range(L):
            if t == 0:
                h_prev = np.zeros(H)
                c_prev = np.zeros(H)
            else:
                h_prev = enc_h[l, t - 1]
                c_prev = enc_c[l, t - 1]
            _, _, _, _, c, _, h = _lstm_cell(
                enc_Wx[l], enc_Wh[l], enc_b[l], inp, h_prev, c_prev
            )
            enc_h[l, t] = h
            enc_c[l, t] = c
            inp = h

    out = np.zeros(max_len, dtype=np.int64)
    h_state = np.zeros((L, H))
    c_state = np.zeros((L, H))
    for l in range(L):
        h_state[l] = enc_h[l, Tin - 1]
        c_state[l] = enc_c[l, Tin - 1]
    token = sos_id
    n = 0
    for _ in range(max_len):
        inp = Eout[token].copy()
        for l in range(L):
            _, _, _, _, c, _, h = _lstm_cell(
                dec_Wx[l], dec_Wh[l], dec_b[l], inp, h_state[l], c_state[l]
            )
            h_state[l] = h
            c_state[l] = c
            inp = h
        top = h_state[L - 1]
        if use_attention:
            q = np.dot(Wa, top)
            scores = np.zeros(Tin)
            for s in range(Tin):
                scores[s] = np.dot(enc_h[L - 1, s], q)
            alpha = _softmax(scores)
            ctx = np.zeros(H)
            for s in range(Tin):
                ctx += alpha[s] * enc_h[L - 1, s]
            cat = np.zeros(2 * H)
            cat[:H] = top
            cat[H:] = ctx
            comb = np.tanh(np.dot(Wc, cat) + bc)
            logits = np.dot(Wo, comb) + bo
        else:
            logits = np.dot(Wo, top) + bo
        best = 0
        for k in range(1, V):
            if logits[k] > logits[best]:
                best = k
        if best == eos_id:
            break
        out[n] = best
        n += 1
        token = best
    return out, n


@njit(cache=True)
def adam_update(flat, grad, m, v, lr, beta1, beta2, eps, step, clip):
    """Global-norm clip fused with one adaptive-moment update.
    Returns the pre-clip gradient norm."""
    sq = 0.0
    for k in range(grad.shape[0]):
        sq += grad[k] * grad[k]
    norm = np.sqrt(sq)
    scale = 1.0
    if norm > clip:
        scale = clip / norm
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    for k in range(flat.shape[0]):
        g = grad[k] * scale
        m[k] = beta1 * m[k] + (1.0 - beta1) * g
        v[k] = beta2 * v[k] + (1.0 - beta2) * g * g
        flat[k] -= lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)
    return norm
