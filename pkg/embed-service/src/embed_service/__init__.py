"""Reference embedding microservice speaking the embed HTTP protocol:

    POST /embed   {"texts": [str]} -> {"dim": int, "vectors": [[float]]}
    GET  /health  -> {"dim": int, "model": str}  (503 while loading)
"""

__version__ = "0.1.0"
