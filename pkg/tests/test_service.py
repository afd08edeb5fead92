import json
import threading
import time
import uuid

import pytest

from helpers import http_json
from wristsig.classifiers import build_training_set, save_model, train_logistic
from wristsig.service import (
    NonceRegistry,
    ServiceConfig,
    VerificationService,
    format_timestamp,
    load_service_config,
    parse_recording,
    parse_timestamp,
    recording_payload,
    start_in_thread,
)
from wristsig.errors import MalformedRecording
from wristsig.storage import ReferenceStore, recording_to_csv


@pytest.fixture(scope="module")
def model(small_corpus):
    return train_logistic(build_training_set(small_corpus.compressed(), seed=0, n_refs=5))


@pytest.fixture
def server(tmp_path, model):
    clock = {"now": 1_700_000_000.0}
    service = VerificationService(model, ReferenceStore(tmp_path / "refs.msig"), clock=lambda: clock["now"])
    srv, url = start_in_thread(service)
    yield url, clock, service
    srv.shutdown()
    srv.server_close()


def _verify(url, clock, user, rec, nonce=None, age=0.0):
    return http_json("POST", url + "/verify", {
        "user_id": user,
        "recording": recording_payload(rec),
        "signed_at": format_timestamp(clock["now"] - age),
        "nonce": nonce or uuid.uuid4().hex,
    })


def test_enroll_and_verify(server, small_corpus):
    url, clock, _ = server
    user = small_corpus.users[0]
    refs = [recording_to_csv(r) for r in user.genuine[:5]]
    status, body = http_json("POST", url + "/enroll", {"user_id": "alice", "recordings": refs})
    assert (status, body["status"], body["n_references"]) == (201, "enrolled", 5)
    status, body = http_json("POST", url + "/enroll", {"user_id": "alice", "recordings": refs})
    assert (status, body["status"]) == (200, "unchanged")

    status, body = _verify(url, clock, "alice", user.genuine[0])
    assert status == 200 and body["decision"] == "GENUINE" and body["score"] > 0.9
    assert body["threshold"] == 0.5 and len(body["model_version"]) == 16

    genuine = _verify(url, clock, "alice", user.genuine[10])[1]["score"]
    forged = _verify(url, clock, "alice", user.skilled_forgeries[0])[1]["score"]
    assert genuine > forged

    status, body = http_json("GET", url + "/health")
    assert status == 200 and body["enrolled_users"] == 1


def test_enroll_errors(server, small_corpus):
    url, _, _ = server
    recs = [recording_to_csv(r) for r in small_corpus.users[0].genuine[:3]]
    assert http_json("POST", url + "/enroll", {"user_id": "a", "recordings": []})[0] == 400
    assert http_json("POST", url + "/enroll", {"recordings": recs})[0] == 400
    assert http_json("POST", url + "/enroll", {"user_id": "a", "recordings": ["t,x\n1,2\n"]})[0] == 400
    assert http_json("POST", url + "/enroll", {"user_id": "a", "recordings": recs})[0] == 201
    other = [recording_to_csv(r) for r in small_corpus.users[1].genuine[:3]]
    status, body = http_json("POST", url + "/enroll", {"user_id": "a", "recordings": other})
    assert status == 409 and body["error"] == "UserAlreadyEnrolled"
    assert http_json("POST", url + "/enroll", {"user_id": "a", "recordings": other, "overwrite": True})[0] == 201
    assert http_json("POST", url + "/nowhere", {})[0] == 404


def test_replay_defense(server, small_corpus):
    url, clock, service = server
    user = small_corpus.users[0]
    http_json("POST", url + "/enroll", {"user_id": "a", "recordings": [recording_to_csv(r) for r in user.genuine[:5]]})
    assert _verify(url, clock, "a", user.genuine[9], nonce="n1")[0] == 200
    status, body = _verify(url, clock, "a", user.genuine[9], nonce="n1")
    assert status == 409 and body["error"] == "ReplayRejected"
    status, _ = _verify(url, clock, "a", user.genuine[9], age=600)
    assert status == 409
    assert _verify(url, clock, "a", user.genuine[9], age=-600)[0] == 409
    # nonces expire with the window
    clock["now"] += 1000
    assert _verify(url, clock, "a", user.genuine[9], nonce="n1")[0] == 200
    assert len(service.nonces) == 1


def test_verify_errors(server, small_corpus):
    url, clock, _ = server
    assert _verify(url, clock, "ghost", small_corpus.users[0].genuine[0])[0] == 404
    status, body = http_json("POST", url + "/verify", {"user_id": "x", "nonce": "n", "signed_at": "yesterday"})
    assert status == 400


def test_nonce_claim_is_atomic():
    reg = NonceRegistry()
    wins = []
    barrier = threading.Barrier(16)

    def go():
        barrier.wait()
        wins.append(reg.claim("same", 100.0, 0.0))

    threads = [threading.Thread(target=go) for _ in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert wins.count(True) == 1


def test_wire_helpers(small_corpus):
    rec = small_corpus.users[0].genuine[0]
    back = parse_recording(recording_payload(rec))
    assert (back.data == rec.data).all()
    assert (parse_recording({"csv": recording_to_csv(rec)}).data == rec.data).all()
    with pytest.raises(MalformedRecording):
        parse_recording({"signals": {"acc_x": [1.0]}})
    with pytest.raises(MalformedRecording):
        parse_recording(42)
    assert parse_timestamp("2024-01-01T00:00:00Z") == parse_timestamp("2024-01-01T00:00:00+00:00") == 1704067200.0
    assert parse_timestamp(format_timestamp(1704067200.5)) == 1704067200.5


def test_config_layering(tmp_path):
    cfg_file = tmp_path / "svc.json"
    cfg_file.write_text(json.dumps({"serve": {"bind": "0.0.0.0:9000", "threshold": 0.7, "model_path": "m"}}))
    cfg = load_service_config(cfg_file, env={})
    assert (cfg.host, cfg.port, cfg.threshold, cfg.model_path) == ("0.0.0.0", 9000, 0.7, "m")
    env = {"WRISTSIG_BIND": "127.0.0.1:9100", "WRISTSIG_THRESHOLD": "0.6", "WRISTSIG_STORE_PATH": "s"}
    cfg = load_service_config(cfg_file, env=env)
    assert (cfg.port, cfg.threshold, cfg.store_path) == (9100, 0.6, "s")
    cfg = load_service_config(cfg_file, env=env, threshold=0.55)
    assert cfg.threshold == 0.55
    assert load_service_config(env={}) == ServiceConfig()
    with pytest.raises(ValueError):
        load_service_config(env={}, colour="red")


def test_from_config(tmp_path, model, small_corpus):
    save_model(model, tmp_path / "m.msig")
    store = ReferenceStore(tmp_path / "s.msig")
    store.enroll("a", small_corpus.users[0].genuine[:5])
    svc = VerificationService.from_config(
        ServiceConfig(model_path=str(tmp_path / "m.msig"), store_path=str(tmp_path / "s.msig"))
    )
    assert svc.health()[1]["enrolled_users"] == 1
    status, body = svc.handle_verify({
        "user_id": "a", "nonce": "x", "signed_at": time.time(),
        "recording": recording_payload(small_corpus.users[0].genuine[12]),
    })
    assert status == 200 and body["decision"] == "GENUINE"
