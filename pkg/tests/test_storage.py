import json
import threading
from http.client import HTTPConnection
from urllib.parse import urlsplit

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nalm.storage import (InvalidMeasurement, MeasurementStore, ServiceConfig, ServiceError, StorageClient,
                          StorageError, make_server)
from nalm.storage.store import RECORD
from service_process import ServiceProcess


def test_store_round_trip(tmp_path):
    store = MeasurementStore(tmp_path)
    assert store.homes() == []
    assert store.store("a", [(3, 1.5), (1, 0.0), (2, 7)]) == 3
    t, w = store.query("a", 0, 10)
    assert t.tolist() == [1, 2, 3] and w.tolist() == [0.0, 7.0, 1.5]
    assert store.query("a", 2, 3)[0].tolist() == [2]
    assert store.query("a", 5, 9)[0].tolist() == []
    assert store.query("unknown", 0, 10)[0].tolist() == []
    store.store("b", [(1, 1)])
    assert store.homes() == ["a", "b"]


def test_store_last_wins_and_durable(tmp_path):
    store = MeasurementStore(tmp_path)
    store.store("a", [(1, 1.0), (2, 2.0)])
    store.store("a", [(1, 9.0)])
    assert store.query("a")[1].tolist() == [9.0, 2.0]
    store.close()
    reopened = MeasurementStore(tmp_path)
    assert reopened.query("a")[1].tolist() == [9.0, 2.0]


def test_store_ignores_torn_tail(tmp_path):
    store = MeasurementStore(tmp_path)
    store.store("a", [(1, 1.0), (2, 2.0)])
    store.close()
    with open(tmp_path / "a.log", "ab") as fh:
        fh.write(RECORD.pack(3, 3.0)[:7])
    reopened = MeasurementStore(tmp_path)
    assert reopened.query("a")[0].tolist() == [1, 2]
    reopened.store("a", [(4, 4.0)])
    reopened.close()
    assert MeasurementStore(tmp_path).query("a")[0].tolist() == [1, 2, 4]


@pytest.mark.parametrize("batch", [[], [(1, -1.0)], [(1, float("nan"))], [(1.5, 1.0)], [(True, 1.0)], [(1, "2")]])
def test_store_rejects_invalid(tmp_path, batch):
    store = MeasurementStore(tmp_path)
    with pytest.raises(InvalidMeasurement):
        store.store("a", batch)
    assert store.homes() == []


@pytest.mark.parametrize("home", ["", ".hidden", "a/b", "x" * 65, "sp ace"])
def test_store_rejects_home_ids(tmp_path, home):
    with pytest.raises(InvalidMeasurement):
        MeasurementStore(tmp_path).store(home, [(1, 1.0)])


def test_store_range_validation(tmp_path):
    with pytest.raises(InvalidMeasurement):
        MeasurementStore(tmp_path).query("a", 5, 1)


def test_store_failure_not_acknowledged(tmp_path, monkeypatch):
    store = MeasurementStore(tmp_path)
    store.store("a", [(1, 1.0)])

    def broken(fd):
        raise OSError("disk on fire")

    monkeypatch.setattr("nalm.storage.store.os.fsync", broken)
    with pytest.raises(StorageError):
        store.store("a", [(2, 2.0)])
    assert store.query("a")[0].tolist() == [1]
    monkeypatch.undo()
    store.close()
    assert MeasurementStore(tmp_path).query("a")[0].tolist() == [1]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abc"), st.integers(-50, 50), st.integers(0, 100)), max_size=60),
       st.lists(st.tuples(st.sampled_from("abcd"), st.integers(-60, 60), st.integers(0, 40)), max_size=10))
def test_store_scan_oracle(tmp_path_factory, writes, queries):
    store = MeasurementStore(tmp_path_factory.mktemp("s"))
    for home, t, w in writes:
        store.store(home, [(t, float(w))])
    latest = {}
    for home, t, w in writes:
        latest[(home, t)] = float(w)
    assert store.homes() == sorted({h for h, _, _ in writes})
    for home, lo, span in queries:
        t, w = store.query(home, lo, lo + span)
        oracle = sorted((ti, wi) for (h, ti), wi in latest.items() if h == home and lo <= ti < lo + span)
        assert list(zip(t.tolist(), w.tolist())) == oracle


@pytest.fixture
def server(tmp_path):
    srv = make_server(ServiceConfig(port=0, data_dir=tmp_path, max_batch=100))
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()
    srv.server_close()
    srv.store.close()


def raw_request(url, method, path, body=None, headers=None):
    conn = HTTPConnection(urlsplit(url).netloc, timeout=10)
    conn.request(method, path, body=body, headers=headers or {})
    response = conn.getresponse()
    return response.status, json.loads(response.read())


def test_http_round_trip(server):
    client = StorageClient(server)
    assert client.homes() == []
    assert client.post("h1", [(1700000002, 3.0), (1700000000, 42.5), (1700000001, 1)]) == 3
    assert client.query("h1", 1700000000, 1700000002) == [(1700000000, 42.5), (1700000001, 1.0)]
    assert client.query("h1") == [(1700000000, 42.5), (1700000001, 1.0), (1700000002, 3.0)]
    assert client.query("nobody", 0, 10) == []
    assert client.homes() == ["h1"]


@pytest.mark.parametrize("body, status", [
    (b"not json", 400),
    (b"{}", 400),
    (b"[]", 400),
    (b'[{"t": 1}]', 400),
    (b'[{"t": 1, "w": 2, "x": 3}]', 400),
    (b'[{"t": "1", "w": 2}]', 400),
    (b'[{"t": 1, "w": -2}]', 400),
    (json.dumps([{"t": i, "w": 1} for i in range(101)]).encode(), 413),
])
def test_http_post_errors(server, body, status):
    code, payload = raw_request(server, "POST", "/homes/h1/measurements", body)
    assert code == status and "error" in payload
    assert StorageClient(server).homes() == []


def test_http_get_errors(server):
    assert raw_request(server, "GET", "/homes/h1/measurements?from=5&to=1")[0] == 400
    assert raw_request(server, "GET", "/homes/h1/measurements?from=x")[0] == 400
    assert raw_request(server, "GET", "/elsewhere")[0] == 404
    assert raw_request(server, "GET", "/homes/bad%2Fid/measurements")[0] == 400
    with pytest.raises(ServiceError) as err:
        StorageClient(server).query("h1", 5, 1)
    assert err.value.status == 400


def test_concurrent_writers(server):
    client = StorageClient(server)

    def writer(i):
        client.post(f"home{i % 3}", [(i * 1000 + k, float(k)) for k in range(100)])

    threads = [threading.Thread(target=writer, args=(i,)) for i in range(10)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    total = sum(len(client.query(h)) for h in client.homes())
    assert total == 1000
    for h in client.homes():
        t = [row[0] for row in client.query(h)]
        assert t == sorted(t)


def test_service_restart_keeps_data(tmp_path):
    with ServiceProcess(tmp_path) as first:
        StorageClient(first.url).post("h", [(5, 1.0), (6, 2.0)])
        first.kill()
    with ServiceProcess(tmp_path) as second:
        assert StorageClient(second.url).query("h") == [(5, 1.0), (6, 2.0)]


def test_config_from_env(tmp_path):
    env = {"NALM_PORT": "9000", "NALM_DATA_DIR": str(tmp_path), "NALM_MAX_BATCH": "5", "NALM_HOST": "0.0.0.0"}
    config = ServiceConfig.from_env(env)
    assert (config.host, config.port, config.data_dir, config.max_batch) == ("0.0.0.0", 9000, tmp_path, 5)
    assert ServiceConfig.from_env(env, port=1).port == 1
    assert ServiceConfig.from_env({}).max_batch == 10_000
    with pytest.raises(ValueError):
        ServiceConfig(max_batch=0)
