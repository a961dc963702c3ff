"""Naive reference implementations used as oracles.

Plain Python loops over nested lists, no vectorized linear algebra, so
expected values are derived independently of the library's numpy paths.
"""
import math


def dot(u, v):
    acc = 0.0
    for a, b in zip(u, v):
        acc += float(a) * float(b)
    return acc


def zeroshot_logits_ref(prototypes, test):
    return [dot(row, test) for row in prototypes]


def class_sums_ref(values, n, k):
    out = []
    for i in range(n):
        acc = 0.0
        for j in range(k):
            acc += float(values[i * k + j])
        out.append(acc)
    return out


def idea_logits_ref(images, texts, prototypes, test, alpha, beta, theta, n, k):
    scores = [
        (1.0 - alpha) * dot(img, test) + alpha * dot(txt, test)
        for img, txt in zip(images, texts)
    ]
    activated = [math.exp(theta * (s - 1.0)) for s in scores]
    few = class_sums_ref(activated, n, k)
    zs = zeroshot_logits_ref(prototypes, test)
    return [beta * few[i] + zs[i] for i in range(n)]


def tidea_logits_ref(
    images, texts, prototypes, test,
    alpha, beta, theta, n, k,
    w_proj, e_bias, enable_proj, enable_bias,
):
    d = len(test)
    # w_proj @ test, computed once per call.
    wt = [dot(w_proj[a], test) for a in range(d)] if enable_proj else None
    scores = []
    for r in range(n * k):
        s = (1.0 - alpha) * dot(images[r], test) + alpha * dot(texts[r], test)
        if enable_proj:
            s += alpha * dot(texts[r], wt)
        if enable_bias:
            s += dot(e_bias[r], test)
        scores.append(s)
    activated = [math.exp(theta * (s - 1.0)) for s in scores]
    few = class_sums_ref(activated, n, k)
    zs = zeroshot_logits_ref(prototypes, test)
    return [beta * few[i] + zs[i] for i in range(n)]
