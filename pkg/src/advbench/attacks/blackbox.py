"""Query-only attacks: one-pixel differential evolution and Nattack.

Both touch the model through ``forward`` under ``no_grad`` and count every
image they score as one query.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..rng import substream
from .base import (
    Attack,
    AttackError,
    check_attack_inputs,
    clip_box,
    finish,
    num_classes_of,
    target_array,
)


def _scores(model, batch) -> np.ndarray:
    with ad.no_grad():
        return model.forward(Tensor(batch)).data


# ---------------------------------------------------------------------------
# one-pixel


def _apply(x, cand, pixel_count, channels, width, height):
    img = x.copy()
    for p in range(pixel_count):
        r, c = int(cand[p, 0]), int(cand[p, 1])
        img[:, r, c] = cand[p, 2 : 2 + channels]
    return img


def _snap(pop, height, width, box, values):
    pop[..., 0] = np.clip(np.rint(pop[..., 0]), 0, height - 1)
    pop[..., 1] = np.clip(np.rint(pop[..., 1]), 0, width - 1)
    v = pop[..., 2:]
    if values is not None:
        grid = np.asarray(values, dtype=np.float64)
        v[...] = grid[np.argmin(np.abs(v[..., None] - grid), axis=-1)]
    else:
        v[...] = np.clip(v, box[0], box[1])
    return pop


def _one_pixel_one(model, x, label, target, pixel_count, de_pop, de_iters, F, CR, rng, box, values, early_stop):
    channels, height, width = x.shape
    dim = 2 + channels

    def cost(pop):
        imgs = np.stack([_apply(x, cand, pixel_count, channels, width, height) for cand in pop])
        probs = ad.softmax_np(_scores(model, imgs))
        preds = np.argmax(probs, axis=1)
        if target is None:
            return probs[:, label], preds != label, imgs
        return -probs[:, target], preds == target, imgs

    pop = np.empty((de_pop, pixel_count, dim))
    pop[..., 0] = rng.uniform(0, height, size=(de_pop, pixel_count))
    pop[..., 1] = rng.uniform(0, width, size=(de_pop, pixel_count))
    if values is not None:
        pop[..., 2:] = rng.choice(np.asarray(values, dtype=np.float64), size=(de_pop, pixel_count, channels))
    else:
        pop[..., 2:] = rng.uniform(box[0], box[1], size=(de_pop, pixel_count, channels))
    pop = _snap(pop, height, width, box, values)
    fit, ok, imgs = cost(pop)
    queries = de_pop
    for _ in range(int(de_iters)):
        if early_stop and ok.any():
            break
        trial = np.empty_like(pop)
        for i in range(de_pop):
            a, b, c = rng.choice([j for j in range(de_pop) if j != i], size=3, replace=False)
            mutant = pop[a] + F * (pop[b] - pop[c])
            cross = rng.random(mutant.shape) < CR
            cross.reshape(-1)[rng.integers(cross.size)] = True
            trial[i] = np.where(cross, mutant, pop[i])
        trial = _snap(trial, height, width, box, values)
        t_fit, t_ok, t_imgs = cost(trial)
        queries += de_pop
        better = t_fit <= fit
        pop[better], fit[better], ok[better], imgs[better] = trial[better], t_fit[better], t_ok[better], t_imgs[better]
    best = int(np.argmin(fit))
    return imgs[best], pop[best], float(fit[best]), queries


def one_pixel(
    model,
    x,
    y,
    pixel_count=1,
    de_pop=40,
    de_iters=30,
    seed=0,
    target=None,
    F=0.5,
    CR=0.9,
    values=None,
    early_stop=True,
    box=(0.0, 1.0),
):
    """Differential evolution (rand/1/bin) over ``pixel_count`` pixel edits.

    A candidate is ``pixel_count`` rows of ``(row, col, value per channel)``.
    The cost is the true-class probability (untargeted) or minus the target
    probability; trials replace parents when no worse. ``values`` restricts
    pixel values to a finite set.
    """
    x, y = check_attack_inputs(model, x, y, box)
    if x.ndim != 4:
        raise AttackError(f"one_pixel expects [n, c, h, w] images, got shape {x.shape}")
    n_pixels = x.shape[2] * x.shape[3]
    if not 1 <= pixel_count <= n_pixels:
        raise AttackError(f"pixel_count must lie in [1, {n_pixels}], got {pixel_count}")
    if de_pop < 4:
        raise AttackError(f"de_pop must be >= 4 for rand/1 mutation, got {de_pop}")
    if de_iters < 0:
        raise AttackError(f"de_iters must be >= 0, got {de_iters}")
    t = target_array(target, len(y))
    if t is not None:
        k = num_classes_of(model, x)
        if t.min() < 0 or t.max() >= k:
            raise AttackError(f"target outside [0, {k})")
    x_adv = np.empty_like(x)
    best = []
    per_sample = np.zeros(len(x), dtype=np.int64)
    for i in range(len(x)):
        rng = substream(seed, "attack/one_pixel", i)
        x_adv[i], cand, _, q = _one_pixel_one(
            model, x[i], int(y[i]), None if t is None else int(t[i]),
            int(pixel_count), int(de_pop), int(de_iters), F, CR, rng, box, values, early_stop,
        )
        best.append(cand)
        per_sample[i] = q
    result = finish(model, x, x_adv, y, t, "l0", iterations=int(de_iters), queries=int(per_sample.sum()))
    result.extra["queries_per_sample"] = per_sample
    result.extra["candidates"] = np.stack(best) if best else np.empty((0, pixel_count, 2 + x.shape[1]))
    return result


# ---------------------------------------------------------------------------
# Nattack


def margin_loss(logits, labels, kappa=0.0) -> np.ndarray:
    """``max(Z_y − max_{i≠y} Z_i, −κ)``; non-positive once misclassified."""
    Z = np.atleast_2d(logits)
    labels = np.broadcast_to(np.asarray(labels), (Z.shape[0],))
    rows = np.arange(Z.shape[0])
    others = Z.copy()
    others[rows, labels] = -np.inf
    return np.maximum(Z[rows, labels] - others.max(axis=1), -kappa)


def nattack(
    model,
    x,
    y,
    eps=0.1,
    population=50,
    sigma=0.1,
    lr=0.02,
    max_iters=300,
    seed=0,
    kappa=0.0,
    box=(0.0, 1.0),
):
    """Search a Gaussian ``N(μ, σ²I)`` over pre-tanh perturbations.

    A draw ``z`` maps to ``clip(x + eps·tanh(z))``. Each iteration scores
    ``population`` draws with the margin loss, z-scores the losses and
    moves ``μ`` by the NES estimate. Stops at the first successful draw.
    """
    if eps < 0 or sigma <= 0 or lr < 0:
        raise AttackError(f"need eps >= 0, sigma > 0, lr >= 0; got eps={eps}, sigma={sigma}, lr={lr}")
    if population < 1 or max_iters < 0:
        raise AttackError(f"need population >= 1 and max_iters >= 0, got {population}, {max_iters}")
    x, y = check_attack_inputs(model, x, y, box)
    x_adv = x.copy()
    per_sample = np.zeros(len(x), dtype=np.int64)
    iters_used = np.zeros(len(x), dtype=np.int64)
    mus = np.empty_like(x)
    for i in range(len(x)):
        rng = substream(seed, "attack/nattack", i)
        mu = rng.normal(0.0, 0.001, size=x.shape[1:])
        xi = x[i]
        found = False
        for it in range(int(max_iters) + 1):
            cand = clip_box(xi + eps * np.tanh(mu), box)
            per_sample[i] += 1
            if margin_loss(_scores(model, cand[None]), y[i], kappa)[0] < 0:
                x_adv[i], found = cand, True
                break
            if it == int(max_iters):
                break
            noise = rng.standard_normal((int(population),) + xi.shape)
            batch = clip_box(xi + eps * np.tanh(mu + sigma * noise), box)
            losses = margin_loss(_scores(model, batch), y[i], kappa)
            per_sample[i] += int(population)
            hit = np.flatnonzero(losses < 0)
            if hit.size:
                x_adv[i], found = batch[hit[0]], True
                break
            z = (losses - losses.mean()) / (losses.std() + 1e-7)
            mu = mu - lr / (population * sigma) * np.tensordot(z, noise, axes=1)
        iters_used[i] = it
        mus[i] = mu
        if not found:
            x_adv[i] = clip_box(xi + eps * np.tanh(mu), box)
    result = finish(model, x, x_adv, y, None, "linf", iterations=int(iters_used.max(initial=0)), queries=int(per_sample.sum()))
    result.extra["queries_per_sample"] = per_sample
    result.extra["mu"] = mus
    result.extra["iterations_per_sample"] = iters_used
    return result


class OnePixel(Attack):
    attack_fn = staticmethod(one_pixel)

    def __init__(self, pixel_count=1, de_pop=40, de_iters=30, seed=0, target=None, F=0.5, CR=0.9, values=None, early_stop=True):
        self.pixel_count = pixel_count
        self.de_pop = de_pop
        self.de_iters = de_iters
        self.seed = seed
        self.target = target
        self.F = F
        self.CR = CR
        self.values = values
        self.early_stop = early_stop


class NAttack(Attack):
    attack_fn = staticmethod(nattack)

    def __init__(self, eps=0.1, population=50, sigma=0.1, lr=0.02, max_iters=300, seed=0, kappa=0.0):
        self.eps = eps
        self.population = population
        self.sigma = sigma
        self.lr = lr
        self.max_iters = max_iters
        self.seed = seed
        self.kappa = kappa
