import numpy as np
import pytest

from cadecoders.render import COLORS, render, render_ppm, render_rgb, render_svg, render_text
from cadecoders.signal_rules import asr_run, window_state


def _zero_trace(steps=5):
    st = window_state([0, 1])
    st.defects[:] = 0
    return asr_run(st, t_max=steps)


def test_zero_trace_is_blank():
    tr = _zero_trace()
    img = render_rgb(tr)
    assert img.shape == (len(tr), tr.size, 3)
    assert np.all(img == np.array(COLORS["empty"], dtype=np.uint8))
    for line in render_text(tr).splitlines():
        assert set(line.split()[1]) == {"."}


def test_ppm_header_matches_dimensions():
    tr = asr_run(window_state([0, 6]), t_max=20)
    blob = render_ppm(tr)
    head = f"P6\n{tr.size} {len(tr)}\n255\n".encode()
    assert blob.startswith(head)
    assert len(blob) == len(head) + 3 * tr.size * len(tr)
    assert len(tr) == 21  # tau + 1 frames


def test_single_pair_fan():
    tr = asr_run(window_state([0, 8]), t_max=30, stop_when_zero=True)
    rows = render_text(tr).splitlines()
    first = rows[0].split()[1]
    assert first.count("D") == 2
    # each defect emits a forward-signal every step; the train grows one site per step
    left, right = first.index("D"), first.rindex("D")
    trains = [r.split()[1][left + 1:right].count(">") for r in rows[1:8]]
    assert trains == list(range(1, 8))


def test_svg_is_well_formed():
    tr = asr_run(window_state([0, 4]), t_max=10)
    svg = render_svg(tr, cell=4)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert f'width="{tr.size * 4}"' in svg


def test_dispatch_and_errors():
    tr = asr_run(window_state([0, 3]), t_max=4)
    assert isinstance(render(tr, "ppm"), bytes)
    assert isinstance(render(tr, "text"), str)
    with pytest.raises(ValueError):
        render(tr, "gif")
