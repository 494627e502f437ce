import socket
import threading
import time
from types import SimpleNamespace

import httpx
import pytest
import uvicorn
from fastapi.testclient import TestClient

from grazing_lab import cli, service


@pytest.fixture(scope="module")
def client():
    return TestClient(service.app)


@pytest.fixture(scope="module")
def live_server():
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    config = uvicorn.Config(service.app, host="127.0.0.1", port=port,
                            log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{port}"
    for _ in range(200):
        try:
            httpx.get(url + "/health", timeout=1.0)
            break
        except httpx.TransportError:
            time.sleep(0.05)
    else:
        raise RuntimeError("service did not come up")
    yield url
    server.should_exit = True
    thread.join(timeout=5)


class TestEndpoints:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"

    def test_check_pairs(self, client):
        r = client.post("/check-pairs", json={"pair": "quadratic",
                                              "samples": 2000})
        assert r.status_code == 200
        body = r.json()
        assert body["passed"] and body["pair"] == "quadratic"

    def test_check_geometry(self, client):
        r = client.post("/check-geometry", json={"dim": 3, "frames": 20000})
        assert r.status_code == 200
        assert r.json()["passed"]

    def test_functionals_roundtrip(self, client):
        r = client.post("/functionals", json={
            "config": {"mc": {"samples": 20000, "seed": 4}},
            "functionals": ["dissipation_landau", "dissipation_cosh"]})
        assert r.status_code == 200
        rows = r.json()["rows"]
        assert [row["functional"] for row in rows] == ["dissipation_landau",
                                                       "dissipation_cosh"]
        assert all(row["value_stderr"] > 0 for row in rows)

    def test_sweep_endpoint(self, client):
        r = client.post("/grazing-sweep", json={
            "config": {"mc": {"samples": 20000}},
            "eps_list": [0.4, 0.1]})
        assert r.status_code == 200
        body = r.json()
        assert len(body["rows"]) == 2
        assert body["failures"] == []

    def test_simulate_endpoint(self, client):
        r = client.post("/simulate", json={
            "config": {"solver": {"n": 200, "dt": 0.02, "horizon": 0.1,
                                  "entropy": False}}})
        assert r.status_code == 200
        body = r.json()
        assert body["neglected_mass_fraction"] <= 1e-3 * (1 + 1e-9)
        assert len(body["final_positions"]) == 200

    def test_schema_violation_422(self, client):
        assert client.post("/functionals",
                           json={"config": {"nope": 1}}).status_code == 422
        assert client.post("/functionals",
                           json={"functionals": ["nope"]}).status_code == 422

    def test_simulate_without_solver_422(self, client):
        assert client.post("/simulate", json={"config": {}}).status_code == 422


class TestThinClient:
    """The CLI dispatch path over HTTP must match the in-process handlers."""

    def test_dispatch_matches_inprocess(self, live_server):
        args = SimpleNamespace(server=live_server, _transport=None)
        req = service.PairCheckRequest(pair="cosh", samples=2000, seed=1)
        remote = cli._dispatch(args, "/check-pairs", service.handle_check_pairs, req)
        local = service.handle_check_pairs(req).model_dump()
        assert remote == local

    def test_functionals_over_http(self, live_server):
        args = SimpleNamespace(server=live_server, _transport=None)
        req = service.FunctionalsRequest(
            config=service.ExperimentConfig.model_validate(
                {"mc": {"samples": 20000, "seed": 2}}),
            functionals=["dissipation_landau"])
        remote = cli._dispatch(args, "/functionals", service.handle_functionals, req)
        local = service.handle_functionals(req).model_dump()
        assert remote["rows"] == local["rows"]

    def test_cli_main_with_server_flag(self, live_server, tmp_path):
        out = tmp_path / "remote.csv"
        code = cli.main(["--server", live_server, "functionals",
                         "--samples", "20000", "--seed", "7",
                         "--functionals", "dissipation_cosh",
                         "--out", str(out)])
        assert code == 0
        local = tmp_path / "local.csv"
        assert cli.main(["functionals", "--samples", "20000", "--seed", "7",
                         "--functionals", "dissipation_cosh",
                         "--out", str(local)]) == 0
        strip = lambda p: [ln for ln in p.read_text().splitlines()
                           if not ln.startswith("# timestamp")]
        assert strip(out) == strip(local)
