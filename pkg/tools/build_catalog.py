"""One-off: writes src/ecgexam/data/criteria.json (shipped default catalog)."""
import json

def maj(node): return {"majority": node}
def f(name, cmp, value): return {"field": name, "cmp": cmp, "value": value}
def leads(group, minimum, test, agg="majority"):
    return {"leads": {"group": group, "min": minimum, "agg": agg, "test": test}}
def rec(name, cmp, value): return {"record": {"field": name, "cmp": cmp, "value": value}}

C = []

def add(fid, display, question, short, category, predicate, kinds, span="qrs",
        field=None, unit=None, glead=None, excl=(), notes=""):
    g = {"kinds": list(kinds), "wave_span": span}
    if field: g["field"] = field
    if unit: g["unit"] = unit
    if glead: g["leads"] = glead
    C.append({
        "finding_id": fid, "display_name": display, "question": question,
        "short_phrase": short, "category": category, "predicate": predicate,
        "grounding": g, "exclusive_with": list(excl), "notes": notes,
    })

# --- PR interval -----------------------------------------------------------
add("prolonged_pr", "Prolonged PR interval",
    "Is the PR interval prolonged (greater than 200 ms) on this ECG?",
    "the prolonged PR interval", "PR interval",
    maj(f("pr_ms", ">", 200)),
    ["wave", "measurement"], span="pr", field="pr_ms", unit="ms",
    excl=["normal_pr", "short_pr"],
    notes="PR > 200 ms in the majority of conducted beats; standard adult limits.")
add("normal_pr", "Normal PR interval",
    "Is the PR interval within normal limits (120-200 ms) on this ECG?",
    "the normal PR interval", "PR interval",
    maj(f("pr_ms", "between", [120, 200])),
    ["wave", "measurement"], span="pr", field="pr_ms", unit="ms",
    excl=["prolonged_pr", "short_pr"])
add("short_pr", "Short PR interval",
    "Is the PR interval short (less than 120 ms) on this ECG?",
    "the short PR interval", "PR interval",
    maj(f("pr_ms", "<", 120)),
    ["wave", "measurement"], span="pr", field="pr_ms", unit="ms",
    excl=["prolonged_pr", "normal_pr"])

# --- AV conduction ----------------------------------------------------------
add("one_to_one_conduction", "1:1 AV conduction (every P followed by a QRS)",
    "Is every P wave followed by a QRS complex on this ECG?",
    "the 1:1 AV conduction", "AV conduction",
    {"all": [rec("n_orphan_p", "==", 0), maj({"flag": "p_present"})]},
    ["wave"], span="p",
    excl=["non_conducted_p"])
add("non_conducted_p", "Non-conducted P waves (P without a following QRS)",
    "Are there non-conducted P waves (P waves not followed by a QRS complex) on this ECG?",
    "the non-conducted P waves", "AV conduction",
    rec("n_orphan_p", ">=", 1),
    ["wave"], span="orphan_p",
    excl=["one_to_one_conduction"])
add("constant_pr_conducted", "Constant PR interval across conducted beats",
    "Is the PR interval constant across the conducted beats on this ECG?",
    "the constant PR interval of conducted beats", "AV conduction",
    rec("pr_range_ms", "<=", 40),
    ["measurement"], field="pr_range_ms", unit="ms")
add("av_dissociation", "AV dissociation (independent atrial and ventricular rhythms)",
    "Do the atrial and ventricular rhythms appear independent (AV dissociation) on this ECG?",
    "the AV dissociation", "AV conduction",
    rec("av_rate_gap_bpm", ">=", 15),
    ["measurement"], field="atrial_rate_bpm", unit="bpm")

# --- Rate and rhythm --------------------------------------------------------
add("ventricular_escape_rate", "Slow ventricular escape rate (below 50 bpm)",
    "Is the ventricular rate below 50 bpm on this ECG?",
    "the slow ventricular escape rate", "Rate and rhythm",
    rec("ventricular_rate_bpm", "<", 50),
    ["measurement"], field="ventricular_rate_bpm", unit="bpm")
add("ventricular_rate_below_60", "Ventricular rate below 60 bpm",
    "Is the ventricular rate below 60 bpm on this ECG?",
    "the ventricular rate below 60 bpm", "Rate and rhythm",
    rec("ventricular_rate_bpm", "<", 60),
    ["measurement"], field="ventricular_rate_bpm", unit="bpm")
add("premature_beat_present", "Premature beat interrupting the underlying rhythm",
    "Is there a premature beat (an early RR interval) on this ECG?",
    "the premature beat", "Rate and rhythm",
    {"exists": {"flag": "premature"}},
    ["wave", "measurement"], span="qrs", field="rr_ms", unit="ms")
add("regular_rhythm", "Regular ventricular rhythm",
    "Is the ventricular rhythm regular on this ECG?",
    "the regular ventricular rhythm", "Rate and rhythm",
    {"not": {"exists": {"any": [f("rr_ratio", "<", 0.85), f("rr_ratio", ">", 1.15)]}}},
    ["measurement"], field="rr_ms", unit="ms")

# --- Ectopic morphology -----------------------------------------------------
add("pac_morphology", "Premature narrow beat preceded by a P wave",
    "Is the premature beat narrow (QRS under 120 ms) and preceded by a P wave?",
    "the premature narrow beat with a preceding P wave", "Ectopic morphology",
    {"exists": {"all": [{"flag": "premature"}, {"flag": "p_present"},
                         f("qrs_dur_ms", "<", 120)]}},
    ["wave"], span="qrs")
add("pvc_morphology", "Premature broad beat without a preceding P wave",
    "Is the premature beat broad (QRS 120 ms or more) and without a preceding P wave?",
    "the premature broad beat without a preceding P wave", "Ectopic morphology",
    {"exists": {"all": [{"flag": "premature"}, {"not": {"flag": "p_present"}},
                         f("qrs_dur_ms", ">=", 120)]}},
    ["wave"], span="qrs")

# --- QRS duration -----------------------------------------------------------
add("prolonged_qrs", "Prolonged QRS duration",
    "Is the QRS duration prolonged (120 ms or more) on this ECG?",
    "the prolonged QRS duration", "QRS duration",
    maj(f("qrs_dur_ms", ">=", 120)),
    ["wave", "measurement"], span="qrs", field="qrs_dur_ms", unit="ms",
    excl=["normal_qrs_duration"],
    notes="Complete bundle branch block threshold, 120 ms.")
add("normal_qrs_duration", "Normal QRS duration",
    "Is the QRS duration within normal limits (under 120 ms) on this ECG?",
    "the normal QRS duration", "QRS duration",
    maj(f("qrs_dur_ms", "<", 120)),
    ["wave", "measurement"], span="qrs", field="qrs_dur_ms", unit="ms",
    excl=["prolonged_qrs"])

# --- QRS morphology ---------------------------------------------------------
add("dominant_s_v1_v2", "Dominant S waves in V1 and V2",
    "Are the S waves dominant (deeper than the R waves) in leads V1 and V2?",
    "the dominant S waves in V1 and V2", "QRS morphology",
    leads(["V1", "V2"], 2, {"flag": "dominant_s"}),
    ["wave"], span="qrs")
add("monophasic_r_lateral", "Positive monophasic R waves without Q waves in the lateral leads",
    "Do the lateral leads show positive monophasic R waves without Q waves?",
    "the monophasic R waves in the lateral leads", "QRS morphology",
    leads("lateral", 2, {"morphology": ["R-monophasic"]}),
    ["lead", "wave"], span="qrs")
add("notched_r_lateral", "Notched R waves in the lateral leads",
    "Are notched R waves present in the lateral leads?",
    "the notched R waves", "QRS morphology",
    leads("lateral", 2, {"flag": "notched_r"}),
    ["lead", "wave"], span="qrs")
add("rsr_v1_v2", "RSR' pattern in V1 or V2",
    "Is an RSR' pattern present in lead V1 or V2?",
    "the RSR' pattern", "QRS morphology",
    leads(["V1", "V2"], 1, {"morphology": ["RSR'"]}),
    ["lead", "wave"], span="qrs")
add("wide_s_lateral", "Wide terminal S waves in leads I and V6",
    "Are wide terminal S waves (40 ms or more) present in leads I and V6?",
    "the wide terminal S waves", "QRS morphology",
    leads(["I", "V6"], 2, {"all": [f("s_dur_ms", ">=", 40), f("s_mv", "<=", -0.1)]}),
    ["lead", "measurement"], field="s_dur_ms", unit="ms")
add("qr_high_lateral", "qR pattern in leads I and aVL",
    "Is a qR pattern present in leads I and aVL?",
    "the qR pattern in I and aVL", "QRS morphology",
    leads(["I", "aVL"], 2, {"morphology": ["qR"]}),
    ["lead", "wave"], span="qrs")
add("rs_inferior", "rS pattern in the inferior leads",
    "Is an rS pattern present in the inferior leads (II, III, aVF)?",
    "the rS pattern in the inferior leads", "QRS morphology",
    leads("inferior", 2, {"morphology": ["rS"]}),
    ["lead", "wave"], span="qrs")
add("qr_inferior", "qR pattern in the inferior leads",
    "Is a qR pattern present in the inferior leads (II, III, aVF)?",
    "the qR pattern in the inferior leads", "QRS morphology",
    leads("inferior", 2, {"morphology": ["qR"]}),
    ["lead", "wave"], span="qrs")
add("rs_high_lateral", "rS pattern in leads I and aVL",
    "Is an rS pattern present in leads I and aVL?",
    "the rS pattern in I and aVL", "QRS morphology",
    leads(["I", "aVL"], 2, {"morphology": ["rS"]}),
    ["lead", "wave"], span="qrs")
add("dominant_r_v1", "Dominant R wave in V1",
    "Is the R wave dominant (taller than the S wave is deep) in lead V1?",
    "the dominant R wave in V1", "QRS morphology",
    leads(["V1"], 1, {"flag": "dominant_r"}),
    ["wave", "measurement"], span="qrs", field="r_mv", unit="mV", glead=["V1"])
add("deep_s_v5_v6", "Deep S waves in V5 or V6",
    "Are deep S waves (0.7 mV or more) present in lead V5 or V6?",
    "the deep S waves in V5 or V6", "QRS morphology",
    leads(["V5", "V6"], 1, f("s_depth_mv", ">=", 0.7)),
    ["lead", "measurement"], field="s_depth_mv", unit="mV")
add("pathological_q_anterior", "Pathological Q waves in the anterior leads",
    "Are pathological Q waves present in the anterior leads (V1-V4)?",
    "the pathological Q waves in the anterior leads", "QRS morphology",
    leads("anterior", 2, {"flag": "pathological_q"}),
    ["lead", "wave"], span="qrs",
    notes="Q duration >= 40 ms or depth >= 25% of the following R.")
add("pathological_q_inferior", "Pathological Q waves in the inferior leads",
    "Are pathological Q waves present in the inferior leads (II, III, aVF)?",
    "the pathological Q waves in the inferior leads", "QRS morphology",
    leads("inferior", 2, {"flag": "pathological_q"}),
    ["lead", "wave"], span="qrs")
add("pathological_q_lateral", "Pathological Q waves in the lateral leads",
    "Are pathological Q waves present in the lateral leads (I, aVL, V5, V6)?",
    "the pathological Q waves in the lateral leads", "QRS morphology",
    leads("lateral", 2, {"flag": "pathological_q"}),
    ["lead", "wave"], span="qrs")

# --- Axis --------------------------------------------------------------------
add("left_axis_deviation", "Left axis deviation",
    "Is there left axis deviation (frontal axis between -45 and -90 degrees) on this ECG?",
    "the left axis deviation", "Axis",
    maj(f("axis_deg", "between", [-90, -45])),
    ["measurement"], field="axis_deg", unit="deg",
    excl=["right_axis_deviation", "normal_axis"],
    notes="Fascicular-block range -45 to -90 degrees.")
add("right_axis_deviation", "Right axis deviation",
    "Is there right axis deviation (frontal axis beyond +95 degrees) on this ECG?",
    "the right axis deviation", "Axis",
    maj(f("axis_deg", ">", 95)),
    ["measurement"], field="axis_deg", unit="deg",
    excl=["left_axis_deviation", "normal_axis"])
add("normal_axis", "Normal frontal-plane axis",
    "Is the frontal-plane axis within normal limits (-30 to +90 degrees) on this ECG?",
    "the normal frontal-plane axis", "Axis",
    maj(f("axis_deg", "between", [-30, 90])),
    ["measurement"], field="axis_deg", unit="deg",
    excl=["left_axis_deviation", "right_axis_deviation"])

# --- Voltage ------------------------------------------------------------------
add("sokolow_lyon_high", "Elevated QRS voltage (S in V1 plus R in V5/V6 at least 3.5 mV)",
    "Does the sum of the S wave in V1 and the tallest R wave in V5 or V6 reach 3.5 mV?",
    "the elevated precordial QRS voltage", "Voltage",
    maj(f("sokolow_mv", ">=", 3.5)),
    ["lead", "measurement"], field="sokolow_mv", unit="mV", glead=["V1", "V5", "V6"])
add("cornell_high", "Elevated QRS voltage (R in aVL plus S in V3 at least 2.8 mV)",
    "Does the sum of the R wave in aVL and the S wave in V3 reach 2.8 mV?",
    "the elevated aVL-plus-V3 voltage", "Voltage",
    maj(f("cornell_mv", ">=", 2.8)),
    ["lead", "measurement"], field="cornell_mv", unit="mV", glead=["aVL", "V3"])
add("high_r_avl", "Tall R wave in aVL (at least 1.1 mV)",
    "Is the R wave in lead aVL at least 1.1 mV tall?",
    "the tall R wave in aVL", "Voltage",
    maj(f("r_avl_mv", ">=", 1.1)),
    ["lead", "measurement"], field="r_avl_mv", unit="mV", glead=["aVL"])
add("normal_voltage", "Normal QRS voltage",
    "Is the QRS voltage within normal limits on this ECG?",
    "the normal QRS voltage", "Voltage",
    {"not": {"any": [maj(f("sokolow_mv", ">=", 3.5)),
                      maj(f("cornell_mv", ">=", 2.8)),
                      maj(f("r_avl_mv", ">=", 1.1))]}},
    ["measurement"], field="sokolow_mv", unit="mV")

# --- ST segment ---------------------------------------------------------------
for group, label in (("anterior", "anterior leads (V1-V4)"),
                     ("inferior", "inferior leads (II, III, aVF)"),
                     ("lateral", "lateral leads (I, aVL, V5, V6)")):
    add(f"st_elevation_{group}", f"ST-segment elevation in the {group} leads",
        f"Is ST-segment elevation (at least 0.1 mV) present in the {label}?",
        f"the ST elevation in the {group} leads", "ST segment",
        leads(group, 2, f("st_mv", ">=", 0.1)),
        ["lead", "wave", "measurement"], span="st", field="st_mv", unit="mV")
    add(f"st_depression_{group}", f"ST-segment depression in the {group} leads",
        f"Is ST-segment depression (at least 0.05 mV) present in the {label}?",
        f"the ST depression in the {group} leads", "ST segment",
        leads(group, 2, f("st_mv", "<=", -0.05)),
        ["lead", "measurement"], field="st_mv", unit="mV")
add("normal_st", "No significant ST-segment deviation",
    "Is the ST segment free of significant deviation on this ECG?",
    "the unremarkable ST segments", "ST segment",
    {"not": {"any": [leads(g, 2, f("st_mv", cmp, v))
                     for g in ("anterior", "inferior", "lateral")
                     for cmp, v in ((">=", 0.1), ("<=", -0.05))]}},
    ["measurement"], field="st_mv", unit="mV")

# --- T wave --------------------------------------------------------------------
for group, label in (("anterior", "anterior leads (V1-V4)"),
                     ("inferior", "inferior leads (II, III, aVF)"),
                     ("lateral", "lateral leads (I, aVL, V5, V6)")):
    add(f"t_inversion_{group}", f"T-wave inversion in the {group} leads",
        f"Is T-wave inversion present in the {label}?",
        f"the T-wave inversion in the {group} leads", "T wave",
        leads(group, 2, f("t_mv", "<=", -0.1)),
        ["lead", "wave"], span="t")
add("upright_t", "Upright T waves in the lateral and inferior leads",
    "Are the T waves upright in leads I, II and V4-V6?",
    "the upright T waves", "T wave",
    leads(["I", "II", "V4", "V5", "V6"], 4, f("t_mv", ">=", 0.05)),
    ["wave"], span="t")

catalog = {
    "version": 1,
    "description": "Default clinical-finding criteria; thresholds follow standard adult ECG limits. Authored for this toolkit; review before clinical use.",
    "criteria": C,
}
with open("../src/ecgexam/data/criteria.json", "w") as fh:
    json.dump(catalog, fh, indent=1)
    fh.write("\n")
print(f"wrote {len(C)} criteria")
