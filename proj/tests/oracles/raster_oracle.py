"""High-precision reference values for the rasterizer tests.

Evaluates the kernel formula directly with mpmath (50 digits). The render
table uses plain per-pixel summation over every kernel, sampling output
pixel (px, py) at low-res coordinate ((px + 0.5) / s, (py + 0.5) / s).
The normalization prefactor is 1 / (2 pi det(Sigma)) with Sigma the low-res
covariance.
"""
import mpmath as mp

mp.mp.dps = 50


def weight(dx, dy, sx, sy, rho, sqrt_det=False):
    dx, dy, sx, sy, rho = map(mp.mpf, (dx, dy, sx, sy, rho))
    one_m = 1 - rho * rho
    det = sx * sx * sy * sy * one_m
    X, Y = dx / sx, dy / sy
    q = (X * X - 2 * rho * X * Y + Y * Y) / one_m
    norm = mp.sqrt(det) if sqrt_det else det
    return mp.exp(-q / 2) / (2 * mp.pi * norm)


def eval_case():
    # sigma=(2,1), rho=0.5, color=(0,1,0), d=(1,1), s=1
    w = weight(1, 1, 2, 1, 0.5)
    print("eval_gaussian derived green =", mp.nstr(w, 25))


FIELD = [
    # (ix, iy, offx, offy, sx, sy, rho, r, g, b)
    (0, 0, 0.25, 0.6, 0.8, 0.5, 0.3, 0.9, 0.2, 0.1),
    (1, 0, 0.5, 0.5, 0.7, 0.7, 0.0, 0.0, 0.0, 0.0),
    (0, 1, 0.5, 0.5, 0.7, 0.7, 0.0, 0.0, 0.0, 0.0),
    (1, 1, 0.7, 0.1, 0.6, 1.1, -0.4, 0.1, 0.5, 0.8),
]


def render_table(scale=2, size=4):
    out = []
    for py in range(size):
        row = []
        for px in range(size):
            qx = (mp.mpf(px) + mp.mpf("0.5")) / scale
            qy = (mp.mpf(py) + mp.mpf("0.5")) / scale
            acc = [mp.mpf(0)] * 3
            for (ix, iy, ox, oy, sx, sy, rho, r, g, b) in FIELD:
                mx = ix + mp.mpf("0.5") + mp.mpf(ox)
                my = iy + mp.mpf("0.5") + mp.mpf(oy)
                w = weight(qx - mx, qy - my, sx, sy, rho)
                for c, col in enumerate((r, g, b)):
                    acc[c] += mp.mpf(col) * w
            row.append(acc)
        out.append(row)
    return out


if __name__ == "__main__":
    eval_case()
    t = render_table()
    print("render_dense table (rows y, cols x, rgb):")
    for row in t:
        print("  {" + ", ".join("{%s, %s, %s}" % tuple(mp.nstr(v, 17) for v in px) for px in row) + "},")
