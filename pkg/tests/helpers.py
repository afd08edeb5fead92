"""Shared test utilities."""

from __future__ import annotations

import dataclasses

import numpy as np

from wristsig.corpus import SignatureCorpus, UserRecord


def mutate_user(corpus: SignatureCorpus, user_id: str, seed: int = 99) -> SignatureCorpus:
    """Replace every recording in ``user_id``'s record with noise of the same shape."""
    rng = np.random.default_rng(seed)

    def scramble(rec):
        return dataclasses.replace(rec, data=rng.normal(size=rec.data.shape) * 5)

    users = []
    for u in corpus.users:
        if u.user_id == user_id:
            u = UserRecord(u.user_id, tuple(map(scramble, u.genuine)), tuple(map(scramble, u.skilled_forgeries)))
        users.append(u)
    return SignatureCorpus(tuple(users))


def http_json(method: str, url: str, body=None):
    """Send a JSON request; returns (status, decoded body) for success and error codes alike."""
    import json
    import urllib.error
    import urllib.request

    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(url, data=data, method=method, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())
