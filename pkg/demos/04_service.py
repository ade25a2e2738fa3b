"""The HTTP service, exercised over real sockets.

Boots the FastAPI app with a mock provider on a free port, then walks the
API: health, recommendations (including level filters and error paths), and
course detail lookups.

Run: python demos/04_service.py
"""

import socket
import threading
import time
from importlib import resources

import httpx
import uvicorn

from compass import MockProvider, embed_catalog, load_catalog
from compass.service import create_app

sample = resources.files("compass").joinpath("data/sample_courses.jsonl")
provider = MockProvider(seed=0, dimension=256)
catalog = embed_catalog(load_catalog(str(sample)), provider)
app = create_app(catalog, provider, k=50, max_concurrent_recommendations=4)

with socket.socket() as probe:
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]

server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()

base = f"http://127.0.0.1:{port}"
for _ in range(100):
    try:
        if httpx.get(f"{base}/api/health", timeout=0.5).status_code == 200:
            break
    except httpx.TransportError:
        time.sleep(0.05)

health = httpx.get(f"{base}/api/health").json()
print(f"health: {health}")

body = {"query": "I am interested in public policy and data analysis.", "levels": "300-400"}
response = httpx.post(f"{base}/api/recommend", json=body, timeout=30)
print(f"\nPOST /api/recommend -> {response.status_code} (request id {response.headers['x-request-id']})")
payload = response.json()
print(f"ideal description: {payload['ideal_description'][:120]}...")
for rec in payload["recommendations"][:5]:
    print(f"  {rec['course_id']:12s} [{rec['confidence']}] {rec['rationale'][:70]}")
print(f"timing: retrieval {payload['timing']['retrieval_ms']:.1f} ms / total {payload['timing']['total_ms']:.1f} ms")

detail = httpx.get(f"{base}/api/courses/{payload['recommendations'][0]['course_id']}").json()
print(f"\ncourse detail: {detail['course_id']}: {detail['title']}")

missing_query = httpx.post(f"{base}/api/recommend", json={}).status_code
unknown_course = httpx.get(f"{base}/api/courses/NOPE%20999").status_code
print("\nerror paths:")
print(f"  missing query  -> {missing_query}")
print(f"  unknown course -> {unknown_course}")

server.should_exit = True
thread.join(timeout=5)
print("\nserver stopped")
