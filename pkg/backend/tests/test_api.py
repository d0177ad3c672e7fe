# HTTP surface: ring, stability, simulation, reproduction and run-history endpoints
import pytest
from fastapi.testclient import TestClient
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from app.core.database import Base, get_db
from app.main import app


@pytest.fixture
def client():
    def no_db():
        yield None

    app.dependency_overrides[get_db] = no_db
    yield TestClient(app)
    app.dependency_overrides.clear()


@pytest.fixture
def db_client(tmp_path):
    engine = create_engine(f"sqlite:///{tmp_path / 'runs.db'}", connect_args={"check_same_thread": False})
    Base.metadata.create_all(bind=engine)
    TestingSession = sessionmaker(autocommit=False, autoflush=False, bind=engine)

    def override_get_db():
        db = TestingSession()
        try:
            yield db
        finally:
            db.close()

    app.dependency_overrides[get_db] = override_get_db
    yield TestClient(app)
    app.dependency_overrides.clear()
    engine.dispose()


def test_root_and_health(client):
    assert client.get("/").json()["status"] == "active"
    health = client.get("/health").json()
    assert health["status"] == "healthy"
    assert health["services"]["kernel"] is True


def test_find_stationary_ring(client):
    response = client.post("/api/rings/find", json={"N": 3, "branch": 2})
    assert response.status_code == 200
    body = response.json()
    assert body["kind"] == "stationary"
    assert body["r0"] == pytest.approx(0.178, abs=5e-4)
    assert body["v0"] == [0.0, 0.0]
    assert body["residual"] < 1e-10
    assert len(body["kernel_sha1"]) == 40


def test_find_traveling_ring_below_bifurcation_is_refused(client):
    response = client.post("/api/rings/find", json={"N": 3, "kind": "traveling", "tau": 0.1})
    assert response.status_code == 422


def test_request_validation(client):
    assert client.post("/api/rings/find", json={"N": 1}).status_code == 422
    assert client.post("/api/rings/find", json={"N": 3, "kind": "spiral"}).status_code == 422


def test_stability_of_an_unstable_square(client):
    response = client.post("/api/rings/stability", json={"N": 4, "branch": 1})
    assert response.status_code == 200
    body = response.json()
    assert body["verdict"] == "unstable"
    assert body["margin"] > 0
    assert [mode["m"] for mode in body["per_mode"]] == [0, 1, 2, 3]
    assert body["full_jacobian"] is None


def test_kernel_zeros(client):
    zeros = client.get("/api/rings/zeros", params={"d_hi": 0.35}).json()
    assert [z["kind"] for z in zeros] == ["attractive", "repulsive", "attractive"]
    assert zeros[0]["d_c"] == pytest.approx(0.162597, abs=1e-5)
    assert zeros[0]["index"] == 1


def test_ode_simulation(client):
    payload = {"N": 3, "branch": 1, "t_end": 50.0, "n_samples": 201, "perturb_mode": 2}
    response = client.post("/api/simulations/ode", json=payload)
    assert response.status_code == 200
    body = response.json()
    assert body["termination"] == "completed"
    assert body["t_final"] == pytest.approx(50.0)
    assert body["initial_deviation"] > 0
    assert body["measurement"]["r_mean"] == pytest.approx(body["ring"]["r0"], rel=1e-3)


def test_ode_simulation_mode_out_of_range(client):
    response = client.post("/api/simulations/ode", json={"N": 3, "perturb_mode": 4, "t_end": 10.0,
                                                         "n_samples": 101})
    assert response.status_code == 422


def test_pde_request_validation(client):
    assert client.post("/api/simulations/pde", json={"nx": 100}).status_code == 422


def test_stationary_table(client):
    body = client.get("/api/reproduce/table/1").json()
    assert body["table"] == 1
    assert body["matches"] is True
    assert len(body["cells"]) == 14
    slow = [c for c in body["cells"] if c["verdict"] != c["published_ode"]]
    assert {(c["branch"], c["N"]) for c in slow} == {(2, 5), (2, 6)}
    assert all(c["observable_verdict"] == "stable" and c["growth_time"] > 4e4 for c in slow)
    assert client.get("/api/reproduce/table/4").status_code == 404


def test_radius_vs_n(client):
    rows = client.get("/api/reproduce/radius-vs-n", params={"n_min": 2, "n_max": 4, "max_branch": 1}).json()["rows"]
    assert [row["N"] for row in rows] == [2, 3, 4]
    assert rows[1]["r0"] == pytest.approx(0.09388, abs=5e-4)
    assert client.get("/api/reproduce/radius-vs-n", params={"n_min": 5, "n_max": 3}).status_code == 422


def test_runs_are_recorded(db_client):
    assert db_client.post("/api/rings/find", json={"N": 3, "branch": 1}).status_code == 200
    assert db_client.post("/api/rings/stability", json={"N": 4, "branch": 1}).status_code == 200

    runs = db_client.get("/api/runs").json()["runs"]
    assert {run["command"] for run in runs} == {"rings find", "stability"}
    stability = db_client.get("/api/runs", params={"command": "stability"}).json()["runs"]
    assert len(stability) == 1
    assert stability[0]["summary"]["verdict"] == "unstable"

    rings = db_client.get(f"/api/runs/{stability[0]['run_id']}/rings").json()["rings"]
    assert rings[0]["N"] == 4
    assert rings[0]["verdict"] == "unstable"
    assert db_client.get("/api/runs/nope/rings").status_code == 404
