"""Shared test utilities: small geometries, dense-operator oracles, and the
numerical inverse-Fourier-transform reference for PSF patches."""

from __future__ import annotations

import math

import numpy as np

from nfsar import geometry as geo
from nfsar.simulate import ComplexImage
from nfsar.solver import VariantDictionary

SPEED_OF_LIGHT = 299_792_458.0
RHO_RANGE_2GHZ = SPEED_OF_LIGHT / (2 * 2e9)   # 0.0749481145 m


def square_geometry(n: int, spacing_m: float, center_range_m: float = 25.0,
                    f0_hz: float = 10e9, bandwidth_hz: float = 2e9,
                    rail_length_m: float = 5.0) -> geo.ImagingGeometry:
    """n x n grid centered on (azimuth 0, the given range)."""
    half = spacing_m * (n // 2)
    grid = geo.GridSpec(n_azimuth=n, n_range=n,
                        spacing_azimuth_m=spacing_m, spacing_range_m=spacing_m,
                        origin_azimuth_m=-half,
                        origin_range_m=center_range_m - half)
    return geo.ImagingGeometry(center_frequency_hz=f0_hz,
                               transmit_bandwidth_hz=bandwidth_hz,
                               rail_length_m=rail_length_m, grid=grid)


def image_on(grid: geo.GridSpec, data: np.ndarray) -> ComplexImage:
    return ComplexImage(data=np.asarray(data, dtype=np.complex128),
                        spacing_azimuth_m=grid.spacing_azimuth_m,
                        spacing_range_m=grid.spacing_range_m,
                        origin_azimuth_m=grid.origin_azimuth_m,
                        origin_range_m=grid.origin_range_m)


def random_image(grid: geo.GridSpec, rng: np.random.Generator) -> ComplexImage:
    shape = grid.shape
    return image_on(grid, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def dense_matrix(dictionary: VariantDictionary) -> np.ndarray:
    """Materialize the dictionary as a dense (cells x atoms) complex matrix;
    column j is atom j deposited on the grid and flattened row-major."""
    shape = dictionary.geometry.grid.shape
    n = shape[0] * shape[1]
    dense = np.zeros((n, n), dtype=np.complex128)
    for j in range(n):
        unit = np.zeros(shape, dtype=np.complex128)
        unit[np.unravel_index(j, shape)] = 1.0
        dense[:, j] = dictionary.apply_array(unit).ravel()
    return dense


def ift_rect_spectrum(d_azimuth_m, d_range_m, angle_rad: float,
                      rho_range_m: float, rho_azimuth_m: float,
                      n_nodes: int = 256) -> np.ndarray:
    """Numerical inverse Fourier transform of the rotated rectangular
    spectral support, by Gauss-Legendre product quadrature in the rotated
    spectral frame (independent of the closed-form sinc expression)."""
    w_r = 1.0 / rho_range_m
    w_a = 1.0 / rho_azimuth_m
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    k_los = 0.5 * w_r * nodes
    wt_los = 0.5 * w_r * weights
    k_across = 0.5 * w_a * nodes
    wt_across = 0.5 * w_a * weights
    u = d_azimuth_m * math.sin(angle_rad) + d_range_m * math.cos(angle_rad)
    v = d_azimuth_m * math.cos(angle_rad) - d_range_m * math.sin(angle_rad)
    integral_los = (wt_los * np.exp(2j * np.pi * np.multiply.outer(u, k_los))).sum(-1)
    integral_across = (wt_across
                       * np.exp(2j * np.pi * np.multiply.outer(v, k_across))).sum(-1)
    return np.real(integral_los * integral_across) / (w_r * w_a)


def direct_convolve_same(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Brute-force 'same' 2D convolution with zero padding (loop oracle)."""
    n0, n1 = image.shape
    k0, k1 = kernel.shape
    h0, h1 = k0 // 2, k1 // 2
    out = np.zeros_like(image, dtype=np.complex128)
    for i in range(n0):
        for j in range(n1):
            acc = 0.0 + 0.0j
            for p in range(k0):
                for q in range(k1):
                    ii = i - (p - h0)
                    jj = j - (q - h1)
                    if 0 <= ii < n0 and 0 <= jj < n1:
                        acc += kernel[p, q] * image[ii, jj]
            out[i, j] = acc
    return out
