"""Optional multi-process mode: stage jobs over local stream sockets.

Messages are length-prefixed binary frames (4-byte big-endian length +
payload); the payload is a pickled StageJob. A render server accepts
connections, renders each received job, and answers with a write-phase
job carrying the finished episode record. Intended for local sockets
only.
"""

from __future__ import annotations

import argparse
import pickle
import socket
import struct
import threading

from .generation import render_episode_job
from .pipeline import StageJob

_LEN = struct.Struct(">I")


def send_msg(sock: socket.socket, payload: bytes):
    sock.sendall(_LEN.pack(len(payload)) + payload)


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    while n > 0:
        chunk = sock.recv(n)
        if not chunk:
            return None
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def recv_msg(sock: socket.socket) -> bytes | None:
    header = _recv_exact(sock, _LEN.size)
    if header is None:
        return None
    (length,) = _LEN.unpack(header)
    return _recv_exact(sock, length)


def encode_stage_job(job: StageJob) -> bytes:
    return pickle.dumps(
        {
            "episode_index": job.episode_index,
            "phase": job.phase,
            "attempt": job.attempt,
            "payload": job.payload,
        },
        protocol=pickle.HIGHEST_PROTOCOL,
    )


def decode_stage_job(data: bytes) -> StageJob:
    obj = pickle.loads(data)
    return StageJob(
        episode_index=obj["episode_index"],
        phase=obj["phase"],
        payload=obj["payload"],
        attempt=obj["attempt"],
    )


def serve_connection(conn: socket.socket):
    """Render jobs from one connection until EOF."""
    with conn:
        while True:
            data = recv_msg(conn)
            if data is None:
                return
            job = decode_stage_job(data)
            if job.phase != "render":
                send_msg(conn, encode_stage_job(StageJob(job.episode_index, "error")))
                continue
            record = render_episode_job(job.payload)
            send_msg(conn, encode_stage_job(StageJob(job.episode_index, "write", payload=record)))


def serve(host: str = "127.0.0.1", port: int = 0):
    """Blocking render server; returns (listener, bound port). Each
    connection gets its own thread."""
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen()

    def loop():
        while True:
            try:
                conn, _ = listener.accept()
            except OSError:
                return
            threading.Thread(target=serve_connection, args=(conn,), daemon=True).start()

    thread = threading.Thread(target=loop, daemon=True)
    thread.start()
    return listener, listener.getsockname()[1]


class RemoteRenderExecutor:
    """Render executor backed by a render server; one connection per
    executor so renderer workers do not interleave frames."""

    def __init__(self, host: str, port: int):
        self.sock = socket.create_connection((host, port))

    def setup(self, batch):
        pass  # setup cost belongs to the server side

    def render(self, payload):
        send_msg(self.sock, encode_stage_job(StageJob(payload.episode_index, "render", payload=payload)))
        data = recv_msg(self.sock)
        if data is None:
            raise ConnectionError("render server closed the connection")
        reply = decode_stage_job(data)
        if reply.phase != "write":
            raise RuntimeError(f"render server replied with phase '{reply.phase}'")
        return reply.payload

    def close(self):
        self.sock.close()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="synthline-render-server")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0)
    args = parser.parse_args(argv)
    listener, port = serve(args.host, args.port)
    print(f"listening {port}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        listener.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
