"""Regenerates the 40x40 evaluation fixture set (plain-text PGM files)."""

from pathlib import Path

SIZE = 40
HERE = Path(__file__).resolve().parent


def blank():
    return [[0] * SIZE for _ in range(SIZE)]


def draw(img, a, b, half=1, value=1):
    (r0, c0), (r1, c1) = a, b
    steps = max(abs(r1 - r0), abs(c1 - c0))
    for k in range(steps + 1):
        t = k / steps if steps else 0.0
        r = r0 + int(round(t * (r1 - r0) + 1e-9))
        c = c0 + int(round(t * (c1 - c0) + 1e-9))
        for y in range(r - half, r + half + 1):
            for x in range(c - half, c + half + 1):
                if 0 <= y < SIZE and 0 <= x < SIZE:
                    img[y][x] = value


TREE = [((38, 20), (26, 20)), ((26, 20), (14, 9)), ((26, 20), (14, 31)),
        ((14, 9), (3, 5)), ((14, 9), (4, 16)), ((14, 31), (3, 35)), ((14, 31), (5, 24))]


def tree(segments=TREE):
    img = blank()
    for a, b in segments:
        draw(img, a, b)
    return img


def soft(mask):
    """Foreground 160..255, background 0..89, deterministic texture."""
    return [[160 + (r * 31 + c * 17) % 96 if mask[r][c] else (r * 13 + c * 7) % 90
             for c in range(SIZE)] for r in range(SIZE)]


def binary(mask):
    return [[255 if v else 0 for v in row] for row in mask]


def write_pgm(path, pixels):
    lines = ["P2", f"{SIZE} {SIZE}", "255"]
    lines += [" ".join(str(v) for v in row) for row in pixels]
    path.write_text("\n".join(lines) + "\n")


def main():
    gt = tree()

    gapped = tree()
    draw(gapped, (20, 15), (20, 15), half=2, value=0)
    draw(gapped, (31, 20), (34, 28))  # spurious spur off the trunk

    pruned = tree(TREE[:3] + [((14, 9), (9, 7))] + TREE[4:])

    pairs = {
        "tree": (soft(gapped), binary(gt)),
        "pruned": (soft(pruned), binary(gt)),
        "same": (binary(gt), binary(gt)),
        "blank": (blank(), binary(gt)),
    }
    for sub in ("pred", "gt"):
        (HERE / sub).mkdir(exist_ok=True)
    for stem, (pred, truth) in pairs.items():
        write_pgm(HERE / "pred" / f"{stem}.pgm", pred)
        write_pgm(HERE / "gt" / f"{stem}.pgm", truth)


if __name__ == "__main__":
    main()
