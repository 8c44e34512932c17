"""Seeded network impairment: injected delay, jitter, and loss.

Stands in for the mobile-network and LAN conditions of the latency
experiments. UDP datagrams are delayed and dropped independently; TCP keeps
its stream semantics, so a "lost" message becomes a retransmit-style stall
that delays every byte behind it (head-of-line blocking emerges naturally).

``VirtualLink`` is the lockstep twin of ``ImpairedChannel``: identical
sampling and ordering rules applied to a virtual timeline instead of a
scheduler thread, so whole-pipeline runs stay bit-deterministic.
"""

from __future__ import annotations

import heapq
import os
import random
import threading
import time
from dataclasses import dataclass

from teleop.transport.channel import Channel, Transport


@dataclass(frozen=True)
class ImpairmentConfig:
    one_way_delay_mean_ms: float
    delay_stddev_ms: float = 0.0
    loss_probability: float = 0.0
    reorder: bool = False
    seed: int = 0
    # TCP only: stall applied instead of a drop (retransmit stand-in).
    stall_penalty_ms: float = 200.0
    # "normal" jitter, or "uniform" within mean +- delay_stddev_ms
    distribution: str = "normal"

    def __post_init__(self) -> None:
        if self.one_way_delay_mean_ms < 0.0:
            raise ValueError("one_way_delay_mean_ms must be >= 0")
        if self.delay_stddev_ms < 0.0:
            raise ValueError("delay_stddev_ms must be >= 0")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValueError("loss_probability must be in [0, 1]")
        if self.distribution not in ("normal", "uniform"):
            raise ValueError("distribution must be 'normal' or 'uniform'")


class DelayModel:
    """Deterministic per-message (lost, delay) sampler under a seed."""

    def __init__(self, config: ImpairmentConfig):
        self.config = config
        self._rng = random.Random(config.seed)

    def sample(self) -> tuple[bool, float]:
        """One (lost, delay_ms) draw; delays are clipped at 0."""
        cfg = self.config
        lost = self._rng.random() < cfg.loss_probability
        if cfg.distribution == "uniform":
            delay = self._rng.uniform(
                cfg.one_way_delay_mean_ms - cfg.delay_stddev_ms,
                cfg.one_way_delay_mean_ms + cfg.delay_stddev_ms,
            )
        else:
            delay = self._rng.gauss(cfg.one_way_delay_mean_ms, cfg.delay_stddev_ms)
        return lost, max(0.0, delay)


class _Scheduler:
    """Writes scheduled frames at their due time on a dedicated thread.

    ``on_written(key, lag_s)`` reports how late each write actually was;
    host stalls show up there, so measurements can calibrate them out.
    """

    def __init__(self, write, on_written=None):
        self._write = write
        self._on_written = on_written
        self._heap: list[tuple[float, int, bytes, object]] = []
        self._tie = 0
        self._cond = threading.Condition()
        self._stopped = False
        self._thread = threading.Thread(target=self._run_elevated, daemon=True)
        self._thread.start()

    def _run_elevated(self) -> None:
        # the emulated delay is only as good as this thread's scheduling;
        # real-time priority keeps it honest under load (best effort)
        try:
            os.sched_setscheduler(0, os.SCHED_FIFO, os.sched_param(10))
        except (OSError, AttributeError, PermissionError):
            pass
        self._run()

    def schedule(self, due_monotonic: float, frame: bytes, key=None) -> None:
        with self._cond:
            self._tie += 1
            heapq.heappush(self._heap, (due_monotonic, self._tie, frame, key))
            self._cond.notify()

    def pending(self) -> int:
        with self._cond:
            return len(self._heap)

    def drain(self, timeout_s: float = 10.0) -> bool:
        deadline = time.monotonic() + timeout_s
        with self._cond:
            while self._heap:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._cond.wait(min(remaining, 0.05))
        return True

    def stop(self) -> None:
        with self._cond:
            self._stopped = True
            self._cond.notify()
        self._thread.join(timeout=2.0)

    # final spin window: condition timeouts overshoot by ~0.1-0.3 ms, which
    # would bias the emulated delays; polling the last stretch keeps the
    # injected delay honest at ~10 us cost
    _SPIN_S = 0.0015

    def _run(self) -> None:
        while True:
            with self._cond:
                while not self._stopped and not self._heap:
                    self._cond.wait()
                if self._stopped:
                    return
                due, _, frame, key = self._heap[0]
                now = time.monotonic()
                if due - now > self._SPIN_S:
                    self._cond.wait(due - now - self._SPIN_S)
                    continue
                heapq.heappop(self._heap)
                self._cond.notify_all()
            while time.monotonic() < due:
                pass
            try:
                self._write(frame)
            except OSError:
                pass  # channel closed underneath; frame is gone anyway
            if self._on_written is not None:
                self._on_written(key, max(0.0, time.monotonic() - due))


class ImpairedChannel:
    """Channel wrapper delaying and dropping sends per an ImpairmentConfig.

    Sequence numbers and send stamps are assigned when ``send`` is called,
    so measured one-way latency includes the injected delay. Receives pass
    straight through to the wrapped channel.
    """

    def __init__(self, inner: Channel, config: ImpairmentConfig):
        self.inner = inner
        self.config = config
        self._model = DelayModel(config)
        self._lock = threading.Lock()
        self._last_due = 0.0
        self._scheduler = _Scheduler(
            lambda frame: inner._write_frame(frame, accept_timeout_s=5.0),
            on_written=self._record_lag,
        )
        self.applied_delays_ms: list[float] = []
        # sequence -> how late the scheduler wrote the frame (ms); nonzero
        # entries are emulator error (host stalls), not link behavior
        self.write_lags_ms: dict[int, float] = {}
        self.dropped_count = 0
        self.stalled_count = 0

    def _record_lag(self, sequence, lag_s: float) -> None:
        if sequence is not None:
            self.write_lags_ms[sequence] = lag_s * 1e3

    def send(self, payload: bytes, payload_type: int | None = None) -> int:
        self.inner._check_send(payload)
        with self._lock:
            sequence, frame = self.inner._build_frame(payload, payload_type)
            lost, delay_ms = self._model.sample()
            now = time.monotonic()
            if self.inner.config.transport is Transport.UDP:
                if lost:
                    self.dropped_count += 1
                    return sequence
                due = now + delay_ms / 1000.0
                if not self.config.reorder:
                    due = max(due, self._last_due)
                    self._last_due = due
            else:
                if lost:
                    delay_ms += self.config.stall_penalty_ms
                    self.stalled_count += 1
                due = max(now + delay_ms / 1000.0, self._last_due)
                self._last_due = due
            self.applied_delays_ms.append(delay_ms)
            self.inner.sent_count += 1
        self._scheduler.schedule(due, frame, key=sequence)
        return sequence

    def recv(self, timeout_ms: float = 1000.0):
        return self.inner.recv(timeout_ms)

    def set_clock_offset_ms(self, offset_ms: float) -> None:
        self.inner.set_clock_offset_ms(offset_ms)

    def drain(self, timeout_s: float = 10.0) -> bool:
        """Wait until every scheduled frame has been written."""
        return self._scheduler.drain(timeout_s)

    def close(self) -> None:
        self._scheduler.stop()
        self.inner.close()

    def __enter__(self) -> "ImpairedChannel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def impair(channel: Channel, config: ImpairmentConfig) -> ImpairedChannel:
    """Wrap an open channel with seeded delay/loss emulation."""
    return ImpairedChannel(channel, config)


class VirtualLink:
    """Impairment on a virtual timeline for lockstep runs.

    ``offer(t_send_ms)`` returns the delivery time in ms, or None for a
    dropped datagram, applying the same FIFO/reorder and stall rules as the
    real scheduler.
    """

    def __init__(self, config: ImpairmentConfig, transport: Transport = Transport.UDP):
        self.config = config
        self.transport = transport
        self._model = DelayModel(config)
        self._last_delivery_ms = 0.0
        self.applied_delays_ms: list[float] = []
        self.dropped_count = 0
        self.stalled_count = 0

    def offer(self, t_send_ms: float) -> float | None:
        lost, delay_ms = self._model.sample()
        if self.transport is Transport.UDP:
            if lost:
                self.dropped_count += 1
                return None
            delivery = t_send_ms + delay_ms
            if not self.config.reorder:
                delivery = max(delivery, self._last_delivery_ms)
                self._last_delivery_ms = delivery
        else:
            if lost:
                delay_ms += self.config.stall_penalty_ms
                self.stalled_count += 1
            delivery = max(t_send_ms + delay_ms, self._last_delivery_ms)
            self._last_delivery_ms = delivery
        self.applied_delays_ms.append(delay_ms)
        return delivery
