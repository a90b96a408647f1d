import csv
import math

import pytest
from hypothesis import given, settings, strategies as st

from prvkit import (
    DegenerateWindowError,
    EmptySeriesError,
    call_timeline,
    connectivity_matrix,
    export_csv,
    export_svg,
    instantaneous_parallelism,
    node_bandwidth,
    routine_time_fractions,
)
from prvkit.records import EventRegistry

from helpers import (
    bandwidth_discretized,
    comm,
    count_messages,
    event,
    make_bundle,
    parallelism_point_sampling,
    replay_timeline,
    state,
)

MS = 1_000_000
ROUTINE = 50000001


# -- instantaneous parallelism -------------------------------------------------


def test_all_tasks_running_saturates():
    records = [state(t, 0, 1000, 1) for t in range(1, 17)]
    series = instantaneous_parallelism(make_bundle(records, n_tasks=16), 100)
    assert series.values == [16.0] * 10


def test_two_task_overlap_hand_value():
    records = [
        state(1, 0, 100, 1),
        state(1, 100, 150, 0),
        state(2, 0, 50, 0),
        state(2, 50, 150, 1),
    ]
    bundle = make_bundle(records, n_tasks=2, total=150)
    series = instantaneous_parallelism(bundle, 150)
    # (50*1 + 50*2 + 50*1) / 150 = 4/3, cross-checked by the 1-ns oracle
    assert series.values == [pytest.approx(4 / 3, abs=1e-12)]
    oracle = parallelism_point_sampling(bundle, 150)
    assert series.values == pytest.approx(oracle, rel=1e-9)


def test_threads_reduce_to_task_by_or():
    records = [
        state(1, 0, 100, 0, thread=1),
        state(1, 0, 100, 1, thread=2),  # one busy thread keeps the task non-idle
    ]
    bundle = make_bundle(records, n_tasks=1, threads_per_task=2, total=100)
    series = instantaneous_parallelism(bundle, 100)
    assert series.values == [1.0]


def test_no_state_records_is_error():
    bundle = make_bundle([event(1, 5, 9, 1)], total=10)
    with pytest.raises(EmptySeriesError):
        instantaneous_parallelism(bundle, 10)


def test_bin_count_and_partial_last_bin():
    records = [state(1, 0, 250, 1)]
    series = instantaneous_parallelism(make_bundle(records, n_tasks=1, total=250), 100)
    assert len(series.values) == math.ceil(250 / 100)
    assert series.values == [1.0, 1.0, 1.0]


def test_windowed_parallelism():
    records = [state(1, 0, 100, 1), state(2, 0, 40, 1), state(2, 40, 100, 0)]
    bundle = make_bundle(records, total=100)
    series = instantaneous_parallelism(bundle, 50, window=(50, 100))
    assert series.values == [1.0]


def test_derive_states_from_routine_events():
    registry = EventRegistry()
    registry.register(ROUTINE, "MPI call", {0: "End", 1: "W"})
    records = [
        event(1, 20, ROUTINE, 1),
        event(1, 80, ROUTINE, 0),
    ]
    bundle = make_bundle(records, n_tasks=1, total=100, registry=registry)
    series = instantaneous_parallelism(
        bundle, 100, derive_from_event_type=ROUTINE
    )
    # busy outside the call block: [0,20) and [80,100) -> 40/100
    assert series.values == [pytest.approx(0.4)]


@settings(max_examples=40, deadline=None)
@given(
    segs=st.lists(
        st.tuples(st.integers(1, 4), st.integers(0, 900), st.integers(1, 100)),
        min_size=1,
        max_size=12,
    ),
    bin_width=st.sampled_from([7, 100, 1000]),
)
def test_parallelism_matches_point_sampling_oracle(segs, bin_width):
    records = [
        state(task, b, min(b + d, 1000), 1) for task, b, d in segs if b < 1000
    ]
    bundle = make_bundle(records, n_tasks=4, total=1000)
    series = instantaneous_parallelism(bundle, bin_width)
    oracle = parallelism_point_sampling(bundle, bin_width)
    assert series.values == pytest.approx(oracle, rel=1e-9, abs=1e-12)
    assert all(0 <= v <= 4 for v in series.values)


# -- call timeline ---------------------------------------------------------------


def timeline_bundle(events_list, total=None, labels=None):
    registry = EventRegistry()
    registry.register(ROUTINE, "MPI call", labels or {0: "End", 3: "routine3", 5: "routine5"})
    records = [event(1, t, ROUTINE, v) for t, v in events_list]
    return make_bundle(records, n_tasks=1, total=total, registry=registry)


def test_single_block():
    bundle = timeline_bundle([(10, 3), (40, 0)], total=50)
    timeline = call_timeline(bundle, ROUTINE)
    assert timeline.rows[(1, 1, 1)] == [(10, 40, 3, "routine3")]
    assert timeline.truncated == []


def test_back_to_back_blocks_match_replay_oracle():
    seq = [(10, 3), (40, 5), (90, 0)]
    bundle = timeline_bundle(seq, total=100)
    timeline = call_timeline(bundle, ROUTINE)
    got = [(b, e, c) for b, e, c, _ in timeline.rows[(1, 1, 1)]]
    assert got == replay_timeline(seq, 100)
    assert got == [(10, 40, 3), (40, 90, 5)]


def test_open_block_closed_at_trace_end_and_flagged():
    bundle = timeline_bundle([(10, 3)], total=70)
    timeline = call_timeline(bundle, ROUTINE)
    assert timeline.rows[(1, 1, 1)] == [(10, 70, 3, "routine3")]
    assert timeline.truncated == [(1, 1, 1)]


def test_zero_length_interval_kept():
    bundle = timeline_bundle([(10, 3), (10, 5), (20, 0)], total=30)
    timeline = call_timeline(bundle, ROUTINE)
    assert (10, 10, 3, "routine3") in timeline.rows[(1, 1, 1)]


def test_missing_event_type_is_error():
    bundle = timeline_bundle([(10, 3), (40, 0)])
    with pytest.raises(EmptySeriesError):
        call_timeline(bundle, 999)


def test_labels_fall_back_without_pcf():
    records = [event(1, 1, ROUTINE, 9), event(1, 5, ROUTINE, 0)]
    bundle = make_bundle(records, n_tasks=1, total=10)
    timeline = call_timeline(bundle, ROUTINE)
    assert timeline.rows[(1, 1, 1)][0][3] == "value 9"


# -- connectivity ---------------------------------------------------------------


def test_empty_matrix():
    bundle = make_bundle([], n_tasks=2, total=10)
    matrix = connectivity_matrix(bundle)
    assert matrix.counts.tolist() == [[0, 0], [0, 0]]


def test_counts_match_enumeration_oracle():
    records = (
        [comm(1, 2, 0, 5, 8)] * 3 + [comm(2, 1, 1, 6, 8)]
    )
    bundle = make_bundle(records, n_tasks=2, total=10)
    matrix = connectivity_matrix(bundle)
    assert matrix.counts.tolist() == [[0, 3], [1, 0]]
    oracle = count_messages(bundle)
    for (x, y), n in oracle.items():
        assert matrix.counts[x - 1, y - 1] == n


def test_total_conservation():
    records = [comm(1, 2, 0, 5, 8), comm(2, 1, 1, 6, 8), comm(1, 2, 2, 7, 8)]
    bundle = make_bundle(records, n_tasks=2, total=10)
    assert connectivity_matrix(bundle).total == 3


# -- routine fractions ------------------------------------------------------------


def test_whole_trace_single_routine():
    bundle = timeline_bundle([(0, 3)], total=100)  # closed at end
    stats = routine_time_fractions(bundle, ROUTINE)
    assert stats.fractions[3] == [1.0]
    assert stats.mean(3) == stats.min(3) == stats.max(3) == 1.0


def test_mean_min_max_across_tasks():
    registry = EventRegistry()
    registry.register(ROUTINE, "MPI call", {7: "A"})
    records = [
        event(1, 0, ROUTINE, 7), event(1, 50, ROUTINE, 0),   # task1: 0.5
        event(2, 0, ROUTINE, 7), event(2, 70, ROUTINE, 0),   # task2: 0.7
    ]
    bundle = make_bundle(records, n_tasks=2, total=100, registry=registry)
    stats = routine_time_fractions(bundle, ROUTINE)
    # oracle: hand-summed durations 50/100 and 70/100
    assert stats.fractions[7] == [pytest.approx(0.5), pytest.approx(0.7)]
    assert stats.mean(7) == pytest.approx(0.6)
    assert stats.min(7) == pytest.approx(0.5)
    assert stats.max(7) == pytest.approx(0.7)


def test_window_clips_blocks():
    bundle = timeline_bundle([(0, 3), (100, 0)], total=100)
    stats = routine_time_fractions(bundle, ROUTINE, window=(50, 100))
    assert stats.fractions[3] == [1.0]


def test_fraction_sum_bounded_by_one():
    bundle = timeline_bundle([(0, 3), (40, 5), (90, 0)], total=100)
    stats = routine_time_fractions(bundle, ROUTINE)
    per_task_total = sum(stats.fractions[c][0] for c in stats.fractions)
    assert per_task_total <= 1.0


def test_degenerate_window_rejected():
    bundle = timeline_bundle([(0, 3), (10, 0)], total=10)
    with pytest.raises(DegenerateWindowError):
        routine_time_fractions(bundle, ROUTINE, window=(5, 5))


def test_timeline_conservation_integer_ns():
    seq = [(10, 3), (40, 5), (90, 0)]
    bundle = timeline_bundle(seq, total=100)
    timeline = call_timeline(bundle, ROUTINE)
    covered = sum(e - b for b, e, _, _ in timeline.rows[(1, 1, 1)])
    outside = 100 - covered
    assert covered + outside == 100
    assert covered == 80


# -- node bandwidth -----------------------------------------------------------------


def test_no_messages_zero_series():
    bundle = make_bundle([], n_tasks=2, total=20 * MS)
    series = node_bandwidth(bundle, 10 * MS)
    assert all(v == 0.0 for s in series for v in s.values)


def test_single_message_hand_value():
    # 1 MiB over 10 ms in one 10 ms bin: 1048576 B / 0.01 s = 104.8576 MB/s
    bundle = make_bundle([comm(1, 2, 0, 10 * MS, 1_048_576)], total=10 * MS)
    [series] = node_bandwidth(bundle, 10 * MS)
    assert series.values == [pytest.approx(104.8576)]
    assert series.units == "MB/s"
    oracle = bandwidth_discretized(bundle, 10 * MS)
    assert series.values == pytest.approx(oracle[0], rel=1e-9)


def test_message_spread_across_bins_matches_discretization_oracle():
    records = [
        comm(1, 2, 3 * MS, 17 * MS, 700_000),
        comm(2, 1, 0, 1, 999),  # near-instant
        comm(1, 2, 19 * MS, 19 * MS, 12345),  # zero duration
    ]
    bundle = make_bundle(records, total=20 * MS)
    [series] = node_bandwidth(bundle, 10 * MS)
    oracle = bandwidth_discretized(bundle, 10 * MS, tick=1_000)
    assert series.values == pytest.approx(oracle[0], rel=1e-6)


def test_zero_duration_message_lands_in_containing_bin():
    bundle = make_bundle([comm(1, 2, 15 * MS, 15 * MS, 1000)], total=20 * MS)
    [series] = node_bandwidth(bundle, 10 * MS)
    assert series.values[0] == 0.0
    assert series.values[1] > 0.0


def test_bytes_conservation():
    records = [comm(1, 2, i * MS, (i + 7) * MS, 5898) for i in range(0, 50, 3)]
    bundle = make_bundle(records, total=60 * MS)
    [series] = node_bandwidth(bundle, 10 * MS)
    recovered = sum(v * (10 * MS / 1e9) * 1e6 for v in series.values)
    assert abs(recovered - len(records) * 5898) < len(records)  # < 1 byte/message


def test_internode_message_counted_on_both_nodes_intranode_once():
    from datetime import datetime
    from prvkit import TraceBundle, build_model

    process, resources = build_model(1, [2], [1, 1], {1: 1, 2: 2}, [1, 1])
    records = [comm(1, 2, 0, 10 * MS, 1000), comm(1, 1, 0, 10 * MS, 500)]
    bundle = TraceBundle(
        capture_time=datetime(2024, 1, 1),
        total_time_ns=10 * MS,
        process=process,
        resources=resources,
        records=records,
    )
    series = node_bandwidth(bundle, 10 * MS)
    bytes_node1 = series[0].values[0] * 0.01 * 1e6
    bytes_node2 = series[1].values[0] * 0.01 * 1e6
    assert bytes_node1 == pytest.approx(1500)  # cross message + intra once
    assert bytes_node2 == pytest.approx(1000)


# -- exports ---------------------------------------------------------------------


def test_timeseries_csv_rows(tmp_path):
    bundle = make_bundle([state(1, 0, 300, 1)], n_tasks=1, total=300)
    series = instantaneous_parallelism(bundle, 100)
    path = tmp_path / "s.csv"
    export_csv(series, str(path))
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["bin_start_s", "instantaneous parallelism"]
    assert len(rows) == 1 + 3


def test_matrix_csv_shape(tmp_path):
    bundle = make_bundle([comm(1, 2, 0, 5, 8)], n_tasks=2, total=10)
    path = tmp_path / "m.csv"
    export_csv(connectivity_matrix(bundle), str(path))
    rows = list(csv.reader(path.open()))
    assert len(rows) == 3  # header + 2 data rows
    assert len(rows[1]) == 3  # axis label + 2 columns


def test_fractions_csv_has_quartiles(tmp_path):
    bundle = timeline_bundle([(0, 3), (50, 0)], total=100)
    stats = routine_time_fractions(bundle, ROUTINE)
    path = tmp_path / "f.csv"
    export_csv(stats, str(path))
    rows = list(csv.reader(path.open()))
    assert rows[0][:7] == ["code", "label", "mean", "min", "max", "p25", "p75"]


def test_timeline_svg_two_colors_and_legend(tmp_path):
    bundle = timeline_bundle([(10, 3), (40, 5), (90, 0)], total=100)
    timeline = call_timeline(bundle, ROUTINE)
    path = tmp_path / "t.svg"
    export_svg(timeline, str(path))
    text = path.read_text()
    fills = {
        part.split('"')[0]
        for part in text.split('fill="')[1:]
        if part.startswith("#")
    }
    assert len(fills) >= 3  # background + two block colors
    assert "routine3" in text
    assert "routine5" in text


def test_matrix_svg_grey_zero_cells(tmp_path):
    bundle = make_bundle([comm(1, 2, 0, 5, 8)], n_tasks=2, total=10)
    path = tmp_path / "m.svg"
    export_svg(connectivity_matrix(bundle), str(path))
    text = path.read_text()
    assert "#c8c8c8" in text  # grey for no communication


def test_stats_svg_band_and_mean(tmp_path):
    bundle = timeline_bundle([(0, 3), (50, 0)], total=100)
    stats = routine_time_fractions(bundle, ROUTINE)
    path = tmp_path / "st.svg"
    export_svg(stats, str(path))
    text = path.read_text()
    assert "<polygon" in text and "<polyline" in text


def test_bandwidth_svg_renders(tmp_path):
    bundle = make_bundle([comm(1, 2, 0, 10 * MS, 1000)], total=20 * MS)
    export_svg(node_bandwidth(bundle, 10 * MS), str(tmp_path / "b.svg"))
    assert (tmp_path / "b.svg").read_text().startswith("<svg")


def test_export_determinism(tmp_path):
    bundle = timeline_bundle([(10, 3), (40, 0)], total=100)
    timeline = call_timeline(bundle, ROUTINE)
    export_svg(timeline, str(tmp_path / "a.svg"))
    export_svg(timeline, str(tmp_path / "b.svg"))
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
