"""Targeted synthesis recipes: each preset programs specific findings and a
specific reasoning path of one diagnosis, so generated records double as
pipeline oracles and as a desk-scale case pool."""

from __future__ import annotations

from dataclasses import dataclass

from .synth import SyntheticSpec


@dataclass(frozen=True)
class Preset:
    name: str
    spec_kwargs: dict
    diagnosis_id: str | None = None       # targeted diagnosis (None: all negative)
    expected_decision: str = "NEGATIVE"
    expected_outcomes: str | None = None  # e.g. "YYYY"
    expected_findings: tuple[str, ...] = ()
    absent_findings: tuple[str, ...] = ()
    hr_choices: tuple[float, ...] = (58.0, 62.0, 66.0, 71.0, 75.0, 80.0)

    def spec(self, seed: int) -> SyntheticSpec:
        kwargs = dict(self.spec_kwargs)
        kwargs.setdefault("heart_rate", self.hr_choices[seed % len(self.hr_choices)])
        kwargs.setdefault("record_id", f"{self.name}-{seed:04d}")
        kwargs.setdefault("seed", seed)
        return SyntheticSpec(**kwargs)


_V1_RSR = {"V1": {"q_amp": 0.0, "r_amp": 0.4, "s_amp": 0.3, "r_prime_amp": 0.9}}

PRESETS: tuple[Preset, ...] = (
    Preset(
        name="normal",
        spec_kwargs={},
        expected_findings=("normal_pr", "normal_qrs_duration", "normal_axis",
                           "one_to_one_conduction", "normal_st", "normal_voltage"),
        absent_findings=("prolonged_pr", "prolonged_qrs", "non_conducted_p",
                         "premature_beat_present"),
    ),
    Preset(
        name="avb1",
        spec_kwargs={"pr_ms": 240.0},
        diagnosis_id="1AVB", expected_decision="POSITIVE", expected_outcomes="YY",
        expected_findings=("prolonged_pr", "one_to_one_conduction"),
        absent_findings=("normal_pr",),
    ),
    Preset(
        name="avb2",
        spec_kwargs={"pr_ms": 180.0, "dropped_qrs_schedule": (3,)},
        diagnosis_id="2AVB", expected_decision="POSITIVE", expected_outcomes="YY",
        expected_findings=("non_conducted_p", "constant_pr_conducted"),
        absent_findings=("one_to_one_conduction", "av_dissociation"),
    ),
    Preset(
        name="avb3",
        spec_kwargs={"av_dissociation": True, "atrial_rate_bpm": 90.0, "qt_ms": 400.0},
        diagnosis_id="3AVB", expected_decision="POSITIVE", expected_outcomes="YYY",
        expected_findings=("non_conducted_p", "av_dissociation", "ventricular_escape_rate"),
        hr_choices=(38.0, 40.0, 42.0, 44.0),
    ),
    Preset(
        name="avb3_moderate",
        spec_kwargs={"av_dissociation": True, "atrial_rate_bpm": 95.0, "qt_ms": 400.0},
        diagnosis_id="3AVB", expected_decision="POSITIVE", expected_outcomes="YYNY",
        expected_findings=("non_conducted_p", "av_dissociation", "ventricular_rate_below_60"),
        absent_findings=("ventricular_escape_rate",),
        hr_choices=(52.0, 54.0, 56.0),
    ),
    Preset(
        name="clbbb",
        spec_kwargs={"qrs_ms": 140.0, "qt_ms": 480.0, "r_amp": 1.2, "notch_depth": 0.18},
        diagnosis_id="CLBBB", expected_decision="POSITIVE", expected_outcomes="YYYY",
        expected_findings=("prolonged_qrs", "dominant_s_v1_v2", "monophasic_r_lateral",
                           "notched_r_lateral"),
        absent_findings=("normal_qrs_duration",),
    ),
    Preset(
        name="crbbb",
        spec_kwargs={"qrs_ms": 140.0, "qt_ms": 480.0, "s_amp": 0.4, "lead_overrides": _V1_RSR},
        diagnosis_id="CRBBB", expected_decision="POSITIVE", expected_outcomes="YYY",
        expected_findings=("prolonged_qrs", "rsr_v1_v2", "wide_s_lateral"),
    ),
    Preset(
        name="lafb",
        spec_kwargs={"axis_deg": -60.0, "q_amp": 0.12},
        diagnosis_id="LAFB", expected_decision="POSITIVE", expected_outcomes="YYYY",
        expected_findings=("left_axis_deviation", "qr_high_lateral", "rs_inferior",
                           "normal_qrs_duration"),
        absent_findings=("normal_axis", "right_axis_deviation"),
    ),
    Preset(
        name="lpfb",
        spec_kwargs={"axis_deg": 120.0, "q_amp": 0.12},
        diagnosis_id="LPFB", expected_decision="POSITIVE", expected_outcomes="YYYY",
        expected_findings=("right_axis_deviation", "qr_inferior", "rs_high_lateral"),
        absent_findings=("left_axis_deviation",),
    ),
    Preset(
        name="lvh",
        spec_kwargs={"r_amp": 2.6},
        diagnosis_id="LVH", expected_decision="POSITIVE", expected_outcomes="YY",
        expected_findings=("sokolow_lyon_high", "normal_qrs_duration"),
        absent_findings=("normal_voltage",),
    ),
    Preset(
        name="rvh",
        spec_kwargs={"axis_deg": 120.0, "lead_overrides": {"V1": {"r_amp": 1.2, "s_amp": 0.1}}},
        diagnosis_id="RVH", expected_decision="POSITIVE", expected_outcomes="YY",
        expected_findings=("right_axis_deviation", "dominant_r_v1"),
    ),
    Preset(
        name="rvh_deep_s",
        spec_kwargs={"axis_deg": 120.0,
                     "lead_overrides": {"V5": {"s_amp": 0.8}, "V6": {"s_amp": 0.8}}},
        diagnosis_id="RVH", expected_decision="POSITIVE", expected_outcomes="YNY",
        expected_findings=("right_axis_deviation", "deep_s_v5_v6"),
        absent_findings=("dominant_r_v1",),
    ),
    Preset(
        name="pac",
        spec_kwargs={"ectopic_schedule": ((5, "atrial-premature"),)},
        diagnosis_id="PAC", expected_decision="POSITIVE", expected_outcomes="YY",
        expected_findings=("premature_beat_present", "pac_morphology"),
        absent_findings=("pvc_morphology", "regular_rhythm"),
        hr_choices=(58.0, 62.0, 66.0),
    ),
    Preset(
        name="pvc",
        spec_kwargs={"ectopic_schedule": ((5, "ventricular-premature"),)},
        diagnosis_id="PVC", expected_decision="POSITIVE", expected_outcomes="YY",
        expected_findings=("premature_beat_present", "pvc_morphology"),
        absent_findings=("pac_morphology",),
        hr_choices=(58.0, 62.0, 66.0),
    ),
    Preset(
        name="ami",
        spec_kwargs={"lead_overrides": {"V3": {"q_amp": 0.35}, "V4": {"q_amp": 0.35}},
                     "st_lead_shifts": {"V1": 0.2, "V2": 0.2, "V3": 0.2, "V4": 0.2}},
        diagnosis_id="AMI", expected_decision="POSITIVE", expected_outcomes="YY",
        expected_findings=("pathological_q_anterior", "st_elevation_anterior"),
        absent_findings=("pathological_q_inferior", "pathological_q_lateral", "normal_st"),
    ),
    Preset(
        name="ami_q_only",
        spec_kwargs={"lead_overrides": {"V3": {"q_amp": 0.35}, "V4": {"q_amp": 0.35}}},
        diagnosis_id="AMI", expected_decision="POSITIVE", expected_outcomes="YN",
        expected_findings=("pathological_q_anterior",),
        absent_findings=("st_elevation_anterior",),
    ),
    Preset(
        name="imi",
        spec_kwargs={"lead_overrides": {"II": {"q_amp": 0.35}, "III": {"q_amp": 0.35},
                                         "aVF": {"q_amp": 0.35}},
                     "st_lead_shifts": {"II": 0.2, "III": 0.2, "aVF": 0.2}},
        diagnosis_id="IMI", expected_decision="POSITIVE", expected_outcomes="YY",
        expected_findings=("pathological_q_inferior", "st_elevation_inferior"),
        absent_findings=("pathological_q_anterior",),
    ),
    Preset(
        name="lmi",
        spec_kwargs={"lead_overrides": {"I": {"q_amp": 0.3}, "V5": {"q_amp": 0.3},
                                         "V6": {"q_amp": 0.3}},
                     "st_lead_shifts": {"I": 0.15, "V5": 0.2, "V6": 0.2}},
        diagnosis_id="LMI", expected_decision="POSITIVE", expected_outcomes="YY",
        expected_findings=("pathological_q_lateral", "st_elevation_lateral"),
    ),
    Preset(
        name="iscan",
        spec_kwargs={"st_lead_shifts": {"V1": -0.15, "V2": -0.15, "V3": -0.15, "V4": -0.15}},
        diagnosis_id="ISCAN", expected_decision="POSITIVE", expected_outcomes="Y",
        expected_findings=("st_depression_anterior",),
        absent_findings=("normal_st",),
    ),
    Preset(
        name="iscan_t_inversion",
        spec_kwargs={"lead_overrides": {"V2": {"t_amp": -0.3}, "V3": {"t_amp": -0.3},
                                         "V4": {"t_amp": -0.3}}},
        diagnosis_id="ISCAN", expected_decision="POSITIVE", expected_outcomes="NY",
        expected_findings=("t_inversion_anterior",),
        absent_findings=("st_depression_anterior",),
    ),
    Preset(
        name="iscin",
        spec_kwargs={"st_lead_shifts": {"II": -0.12, "III": -0.12, "aVF": -0.12}},
        diagnosis_id="ISCIN", expected_decision="POSITIVE", expected_outcomes="Y",
        expected_findings=("st_depression_inferior",),
    ),
    Preset(
        name="iscla",
        spec_kwargs={"st_lead_shifts": {"I": -0.12, "V5": -0.12, "V6": -0.12}},
        diagnosis_id="ISCLA", expected_decision="POSITIVE", expected_outcomes="Y",
        expected_findings=("st_depression_lateral",),
    ),
    # Negative-path variants broaden the sampled path coverage.
    Preset(
        name="wide_qrs_only",
        spec_kwargs={"qrs_ms": 140.0, "qt_ms": 480.0,
                     "lead_overrides": {"V1": {"r_amp": 0.6, "s_amp": 0.2},
                                         "V2": {"r_amp": 0.6, "s_amp": 0.2}}},
        diagnosis_id="CLBBB", expected_decision="NEGATIVE", expected_outcomes="YN",
        expected_findings=("prolonged_qrs",),
        absent_findings=("dominant_s_v1_v2",),
    ),
    Preset(
        name="lvh_wide",
        spec_kwargs={"r_amp": 2.6, "qrs_ms": 140.0, "qt_ms": 480.0},
        diagnosis_id="LVH", expected_decision="NEGATIVE", expected_outcomes="YN",
        expected_findings=("sokolow_lyon_high", "prolonged_qrs"),
        absent_findings=("normal_qrs_duration",),
    ),
)

PRESETS_BY_NAME = {p.name: p for p in PRESETS}


def build_pool(seeds_per_preset: int = 2, names: list[str] | None = None) -> list[tuple[Preset, SyntheticSpec]]:
    """The default desk-scale pool: every preset at several seeds."""
    chosen = [PRESETS_BY_NAME[n] for n in names] if names else list(PRESETS)
    out = []
    for preset in chosen:
        for seed in range(seeds_per_preset):
            out.append((preset, preset.spec(seed)))
    return out
