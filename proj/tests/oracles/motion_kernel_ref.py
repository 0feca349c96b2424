#!/usr/bin/env python3
# Copyright 2026 The tdrn Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Independent reference for the random motion-blur kernel generator.

Re-implements xoshiro256** with splitmix64 seeding and the trajectory
splatting in plain Python. Prints the kernel for (seed, size) as JSON:

    python3 motion_kernel_ref.py 0 11
"""

import json
import math
import sys

MASK = (1 << 64) - 1


def splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


def rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK


class Rng:
    def __init__(self, seed):
        self.s = []
        st = seed & MASK
        for _ in range(4):
            st, v = splitmix64(st)
            self.s.append(v)

    def next(self):
        s = self.s
        result = (rotl((s[1] * 5) & MASK, 7) * 9) & MASK
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result

    def uniform(self, lo=None, hi=None):
        u = (self.next() >> 11) * 2.0 ** -53
        if lo is None:
            return u
        return lo + (hi - lo) * u

    def normal(self):
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def motion_kernel(size, rng):
    steps = 1000
    expl = 0.1 * rng.uniform()
    centripetal = 0.7 * rng.uniform()
    big_shake = 0.2 * rng.uniform()
    gauss_shake = 10.0 * rng.uniform()
    angle = 2.0 * math.pi * rng.uniform()
    max_len = (size - 1) * rng.uniform(0.6, 1.4)
    step = max_len / (steps - 1)

    px = [0.0] * steps
    py = [0.0] * steps
    vx = math.cos(angle) * step
    vy = math.sin(angle) * step
    for t in range(steps - 1):
        nx = ny = 0.0
        if rng.uniform() < big_shake * expl:
            phi = math.pi + (rng.uniform() - 0.5)
            c, s = math.cos(phi), math.sin(phi)
            nx = 2.0 * (vx * c - vy * s)
            ny = 2.0 * (vx * s + vy * c)
        gx = rng.normal()
        gy = rng.normal()
        vx += nx + expl * (gauss_shake * gx - centripetal * px[t]) * step
        vy += ny + expl * (gauss_shake * gy - centripetal * py[t]) * step
        norm = math.sqrt(vx * vx + vy * vy)
        vx = vx / norm * step
        vy = vy / norm * step
        px[t + 1] = px[t] + vx
        py[t + 1] = py[t] + vy

    extent = max(max(px) - min(px), max(py) - min(py))
    limit = size - 1.0
    scale = limit / extent if extent > limit else 1.0
    cx = (min(px) + max(px)) / 2.0
    cy = (min(py) + max(py)) / 2.0
    half = (size - 1) / 2.0

    w = [0.0] * (size * size)
    for t in range(steps):
        x = min(max((px[t] - cx) * scale + half, 0.0), limit)
        y = min(max((py[t] - cy) * scale + half, 0.0), limit)
        ix = min(int(math.floor(x)), size - 2)
        iy = min(int(math.floor(y)), size - 2)
        fx, fy = x - ix, y - iy
        w[iy * size + ix] += (1 - fx) * (1 - fy)
        w[iy * size + ix + 1] += fx * (1 - fy)
        w[(iy + 1) * size + ix] += (1 - fx) * fy
        w[(iy + 1) * size + ix + 1] += fx * fy
    total = sum(w)
    return [v / total for v in w]


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    size = int(sys.argv[2]) if len(sys.argv) > 2 else 11
    w = motion_kernel(size, Rng(seed))
    print(json.dumps({
        "seed": seed,
        "size": size,
        "support": sum(1 for v in w if v > 0.0),
        "center": w[(size // 2) * size + size // 2],
        "max": max(w),
        "argmax": w.index(max(w)),
        "first_uniforms": [Rng(seed).uniform() for _ in range(1)],
    }))


if __name__ == "__main__":
    main()
