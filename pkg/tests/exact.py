"""Exact outcome enumeration for the verifier.

The verifier's randomness enters only through the accept test and through
token draws. Replacing both with explicit weighted branching turns one
decoding run into a finite tree of outcomes whose probabilities can be
summed exactly.
"""

from collections import defaultdict
from contextlib import contextmanager

import numpy as np

import speclab.verify as verify_mod
from speclab.core import ROOT, DraftNode, DraftProposal, Structure
from speclab.model import apply_temperature, draft_next, target_next
from speclab.verify import VerifyMode


class _Branch(Exception):
    pass


class Chooser:
    def __init__(self, script):
        self.script = script
        self.pos = 0
        self.weight = 1.0

    def __call__(self, options):
        options = [(v, w) for v, w in options if w > 0]
        if self.pos == len(self.script):
            raise _Branch(len(options))
        value, w = options[self.script[self.pos]]
        self.pos += 1
        self.weight *= w
        return value


@contextmanager
def patched(chooser_ref):
    orig_accepts, orig_sample = verify_mod._accepts, verify_mod.sample_token

    def accepts(u, p, node):
        qx = 1.0 if node.q is None else float(node.q[node.token])
        a = min(1.0, float(p[node.token]) / qx)
        return chooser_ref[0]([(True, a), (False, 1.0 - a)])

    def sample(d, rng):
        return chooser_ref[0]([(t, float(d[t])) for t in range(len(d))])

    verify_mod._accepts, verify_mod.sample_token = accepts, sample
    try:
        yield
    finally:
        verify_mod._accepts, verify_mod.sample_token = orig_accepts, orig_sample


def enumerate_runs(run):
    """``run(choose)`` returns a hashable result; returns {result: probability}."""
    out = defaultdict(float)
    ref = [None]
    stack = [()]
    with patched(ref):
        while stack:
            script = stack.pop()
            ref[0] = Chooser(script)
            try:
                result = run(ref[0])
            except _Branch as b:
                stack.extend(script + (i,) for i in range(b.args[0]))
                continue
            out[result] += ref[0].weight
    return dict(out)


def sampled_chain(draft, state, k, temperature, choose):
    nodes = []
    s = state
    for i in range(k):
        q = apply_temperature(draft_next(draft, s), temperature)
        tok = choose([(t, float(q[t])) for t in range(len(q))])
        nodes.append(DraftNode(tok, i - 1 if i else ROOT, float(q[tok]), q))
        s = s.extend((tok,))
    return DraftProposal(Structure.LINEAR, tuple(nodes))


def sampled_tree(draft, state, width, temperature, choose):
    """``width`` i.i.d. root candidates; the first also gets one sampled child."""
    nodes = []
    q0 = apply_temperature(draft_next(draft, state), temperature)
    for _ in range(width):
        tok = choose([(t, float(q0[t])) for t in range(len(q0))])
        nodes.append(DraftNode(tok, ROOT, float(q0[tok]), q0))
        if len(nodes) > 2:
            continue
        parent = len(nodes) - 1
        q1 = apply_temperature(draft_next(draft, state.extend((tok,))), temperature)
        kid = choose([(t, float(q1[t])) for t in range(len(q1))])
        nodes.append(DraftNode(kid, parent, float(q1[kid]), q1))
    return DraftProposal(Structure.TREE, tuple(nodes))


def target_paths(target, state, length, temperature):
    """Exact probabilities of every ``length``-token continuation under the target."""
    probs = {(): 1.0}
    for _ in range(length):
        nxt = {}
        for path, w in probs.items():
            p = apply_temperature(target_next(target, state.extend(path)), temperature)
            for t in range(len(p)):
                if p[t] > 0:
                    nxt[path + (t,)] = w * float(p[t])
        probs = nxt
    return probs


def decode_paths(target, state, length, temperature, propose):
    """Exact distribution of the first ``length`` committed tokens of a draft-verify loop."""
    mode = VerifyMode(temperature)

    def run(choose):
        s = state
        out = ()
        while len(out) < length:
            prop = propose(s, choose)
            outcome = verify_mod.verify(target, s, prop, mode, np.random.default_rng(0))
            out += outcome.committed
            s = s.extend(outcome.committed)
        return out[:length]

    return enumerate_runs(run)
