#!/usr/bin/env python3
"""
Acceptance Validator
Fast self-checks of the gate law, fusion, NetVLAD, filters and the training schedule
"""

import math
from typing import Callable, Dict

import numpy as np

from .attributes import filter_by_bbox, filter_by_confidence
from .datamodel import BoundingBox, DetectionRecord
from .encoding import NetVladParams, netvlad_forward, netvlad_gradients
from .fusion import FusionWeights, find_disagreement_witness, fuse_revised
from .inference import GateConfig, joint_predict
from .training import TrainConfig, grad_check, lr_at


class AcceptanceValidator:
    """Runs named checks and collects PASSED / FAILED / ERROR results"""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.validation_results: Dict[str, str] = {}

    @property
    def total_tests(self) -> int:
        return len(self.validation_results)

    @property
    def passed_tests(self) -> int:
        return sum(status == "PASSED" for status in self.validation_results.values())

    def check(self, name: str, run: Callable[[], bool]) -> str:
        """Run one check and record PASSED, FAILED or ERROR: <reason>"""
        try:
            status = "PASSED" if run() else "FAILED"
        except Exception as e:
            status = f"ERROR: {e}"
        self.validation_results[name] = status
        return status

    def test_gating_law(self, pairs: int = 10000) -> bool:
        rng = np.random.default_rng(self.seed)
        gate = GateConfig(0.1)
        for _ in range(pairs):
            # sharpness spread so both sides of the threshold are hit
            p1 = rng.dirichlet(np.full(20, rng.choice([0.05, 1.0, 20.0])))
            p2 = rng.dirichlet(np.ones(20))
            expected = p1 if p1.max() > 0.1 else p2
            if joint_predict(p1, p2, gate) is not expected:
                return False
        return True

    def test_fusion(self) -> bool:
        fused = fuse_revised(np.array([2.0, 0.0]), np.array([0.0, 2.0]), FusionWeights(0.6, 0.4))
        e1, e2 = math.exp(1.2), math.exp(0.8)
        oracle = np.array([e1 / (e1 + e2), e2 / (e1 + e2)])
        if not np.allclose(fused, oracle, rtol=0, atol=1e-9):
            return False
        return find_disagreement_witness(seed=self.seed) is not None

    def test_netvlad(self) -> bool:
        rng = np.random.default_rng(self.seed)
        k, d, n = 4, 8, 5
        params = NetVladParams(rng.normal(size=(k, d)), rng.normal(size=(k, d)), rng.normal(size=k))
        features = list(rng.normal(size=(n, d)))
        out = netvlad_forward(features, params).vector
        if abs(np.linalg.norm(out) - 1.0) > 1e-9:
            return False
        shuffled = [features[i] for i in rng.permutation(n)]
        if not np.allclose(netvlad_forward(shuffled, params).vector, out, rtol=0, atol=1e-12):
            return False

        upstream = rng.normal(size=k * d)
        grads, _ = netvlad_gradients(features, params, upstream)

        def loss(centers: np.ndarray) -> float:
            probe = NetVladParams(centers, params.assign_weights, params.assign_biases)
            return float(np.dot(upstream, netvlad_forward(features, probe).vector))

        return grad_check(loss, grads.centers, params.centers, 1e-5) < 1e-4

    def test_filter_boundaries(self) -> bool:
        def det(confidence: float, side: float) -> DetectionRecord:
            return DetectionRecord("v", 0, ("guitar",), confidence, BoundingBox(0, 0, side, 30))

        return (filter_by_bbox([det(0.5, 19)], 20) == []
                and len(filter_by_bbox([det(0.5, 20)], 20)) == 1
                and filter_by_confidence([det(0.019, 30)], 0.02) == []
                and len(filter_by_confidence([det(0.02, 30)], 0.02)) == 1)

    def test_schedule(self) -> bool:
        cfg = TrainConfig(initial_lr=0.001, decay_factor=0.8, decay_every_epochs=10)
        return [lr_at(e, cfg) for e in (0, 10, 20)] == [0.001, 0.0008, 0.00064]

    def run_validation(self) -> bool:
        """Run every acceptance check"""
        print("🚀 A3D Acceptance Validation")
        print("=" * 60)

        checks = [
            ("Gating law", self.test_gating_law),
            ("Two-stream fusion", self.test_fusion),
            ("NetVLAD", self.test_netvlad),
            ("Filter boundaries", self.test_filter_boundaries),
            ("LR schedule", self.test_schedule),
        ]
        for name, run in checks:
            status = self.check(name, run)
            print(f"{'✅' if status == 'PASSED' else '❌'} {name:<20} {status}")

        print(f"\n✅ Passed: {self.passed_tests}/{self.total_tests}")
        return self.passed_tests == self.total_tests
