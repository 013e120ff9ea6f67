"""Writes image.csv: a 40x40 synthetic grayscale image (smooth rank-3 pattern
plus integer rounding noise) used by the window-minus-window golden test."""
import numpy as np

rng = np.random.default_rng(20240601)
i = np.arange(40)[:, None]
j = np.arange(40)[None, :]
img = (128.0
       + 50.0 * np.sin(i / 6.0) * np.cos(j / 9.0)
       + 30.0 * np.cos(i / 11.0 + 0.5) * np.sin(j / 5.0)
       + 15.0 * (i / 39.0) * (j / 39.0)
       + rng.normal(0.0, 2.0, size=(40, 40)))
img = np.clip(np.rint(img), 0, 255).astype(int)
np.savetxt("image.csv", img, fmt="%d", delimiter=",")
