"""One-off: writes src/ecgexam/data/diagrams.json and compounds.json."""
import json

def chain(dx, name, group, findings):
    """Sequential all-yes-positive chain: any 'no' is NEGATIVE."""
    nodes = {}
    for i, fid in enumerate(findings):
        nid = f"n{i+1}"
        nxt = f"n{i+2}" if i + 1 < len(findings) else "POSITIVE"
        nodes[nid] = {"finding_id": fid, "yes": nxt, "no": "NEGATIVE"}
    return {"diagnosis_id": dx, "display_name": name, "group": group,
            "root": "n1", "nodes": nodes,
            "reconstruction": True}

D = []

D.append(chain("1AVB", "First Degree AV Block", "AV Block",
               ["one_to_one_conduction", "prolonged_pr"]))
D.append(chain("2AVB", "Second Degree AV Block", "AV Block",
               ["non_conducted_p", "constant_pr_conducted"]))
D.append({
    "diagnosis_id": "3AVB", "display_name": "Third Degree AV Block", "group": "AV Block",
    "root": "n1", "reconstruction": True,
    "nodes": {
        "n1": {"finding_id": "non_conducted_p", "yes": "n2", "no": "NEGATIVE"},
        "n2": {"finding_id": "av_dissociation", "yes": "n3", "no": "NEGATIVE"},
        "n3": {"finding_id": "ventricular_escape_rate", "yes": "POSITIVE", "no": "n4"},
        "n4": {"finding_id": "ventricular_rate_below_60", "yes": "POSITIVE", "no": "NEGATIVE"},
    },
})
D.append(chain("CLBBB", "Complete Left Bundle Branch Block", "Conduction Disturbance",
               ["prolonged_qrs", "dominant_s_v1_v2", "monophasic_r_lateral", "notched_r_lateral"]))
D.append({
    "diagnosis_id": "CRBBB", "display_name": "Complete Right Bundle Branch Block",
    "group": "Conduction Disturbance", "root": "n1", "reconstruction": True,
    "nodes": {
        "n1": {"finding_id": "prolonged_qrs", "yes": "n2", "no": "NEGATIVE"},
        "n2": {"finding_id": "rsr_v1_v2", "yes": "n4", "no": "n3"},
        "n3": {"finding_id": "dominant_r_v1", "yes": "n4", "no": "NEGATIVE"},
        "n4": {"finding_id": "wide_s_lateral", "yes": "POSITIVE", "no": "NEGATIVE"},
    },
})
D.append(chain("LAFB", "Left Anterior Fascicular Block", "Conduction Disturbance",
               ["left_axis_deviation", "qr_high_lateral", "rs_inferior", "normal_qrs_duration"]))
D.append(chain("LPFB", "Left Posterior Fascicular Block", "Conduction Disturbance",
               ["right_axis_deviation", "qr_inferior", "rs_high_lateral", "normal_qrs_duration"]))
D.append({
    "diagnosis_id": "LVH", "display_name": "Left Ventricular Hypertrophy", "group": "Hypertrophy",
    "root": "n1", "reconstruction": True,
    "nodes": {
        "n1": {"finding_id": "sokolow_lyon_high", "yes": "n4", "no": "n2"},
        "n2": {"finding_id": "cornell_high", "yes": "n4", "no": "n3"},
        "n3": {"finding_id": "high_r_avl", "yes": "n4", "no": "NEGATIVE"},
        "n4": {"finding_id": "normal_qrs_duration", "yes": "POSITIVE", "no": "NEGATIVE"},
    },
})
D.append({
    "diagnosis_id": "RVH", "display_name": "Right Ventricular Hypertrophy", "group": "Hypertrophy",
    "root": "n1", "reconstruction": True,
    "nodes": {
        "n1": {"finding_id": "right_axis_deviation", "yes": "n2", "no": "NEGATIVE"},
        "n2": {"finding_id": "dominant_r_v1", "yes": "POSITIVE", "no": "n3"},
        "n3": {"finding_id": "deep_s_v5_v6", "yes": "POSITIVE", "no": "NEGATIVE"},
    },
})
D.append(chain("PAC", "Premature Atrial Complex", "Ectopic Beat",
               ["premature_beat_present", "pac_morphology"]))
D.append(chain("PVC", "Premature Ventricular Complex", "Ectopic Beat",
               ["premature_beat_present", "pvc_morphology"]))
for dx, name, group_leads in (("AMI", "Anterior Myocardial Infarction", "anterior"),
                              ("IMI", "Inferior Myocardial Infarction", "inferior"),
                              ("LMI", "Lateral Myocardial Infarction", "lateral")):
    D.append({
        "diagnosis_id": dx, "display_name": name, "group": "Myocardial Infarction",
        "root": "n1", "reconstruction": True,
        "nodes": {
            "n1": {"finding_id": f"pathological_q_{group_leads}", "yes": "n2", "no": "NEGATIVE"},
            "n2": {"finding_id": f"st_elevation_{group_leads}", "yes": "POSITIVE", "no": "POSITIVE"},
        },
    })
for dx, name, group_leads in (("ISCAN", "Anterior Ischemia", "anterior"),
                              ("ISCIN", "Inferior Ischemia", "inferior"),
                              ("ISCLA", "Lateral Ischemia", "lateral")):
    D.append({
        "diagnosis_id": dx, "display_name": name, "group": "Ischemia",
        "root": "n1", "reconstruction": True,
        "nodes": {
            "n1": {"finding_id": f"st_depression_{group_leads}", "yes": "POSITIVE", "no": "n2"},
            "n2": {"finding_id": f"t_inversion_{group_leads}", "yes": "POSITIVE", "no": "NEGATIVE"},
        },
    })

with open("../src/ecgexam/data/diagrams.json", "w") as fh:
    json.dump({
        "version": 1,
        "description": "Decision diagrams reconstructed from standard criteria; each entry is flagged 'reconstruction'. Review before clinical use.",
        "diagrams": D,
    }, fh, indent=1)
    fh.write("\n")

compounds = {
    "version": 1,
    "compounds": [
        {"compound_id": "ILMI", "display_name": "Inferolateral Myocardial Infarction",
         "all_of": ["IMI", "LMI"]},
        {"compound_id": "ALMI", "display_name": "Anterolateral Myocardial Infarction",
         "all_of": ["AMI", "LMI"]},
    ],
}
with open("../src/ecgexam/data/compounds.json", "w") as fh:
    json.dump(compounds, fh, indent=1)
    fh.write("\n")
print(f"wrote {len(D)} diagrams")
