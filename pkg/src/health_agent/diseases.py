"""Disease catalog used by the data factory and the symptom lexicon.

Diseases are grouped by the specialization a booking for them should
target; each group carries a pool of layperson symptom phrases that
generated queries sample from. The union of all pools is the SYMPTOM
lexicon for rule-based entity extraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random
from typing import Iterable


@dataclass(frozen=True)
class SpecializationGroup:
    specialization: str
    diseases: tuple[str, ...]
    symptoms: tuple[str, ...]


GROUPS: tuple[SpecializationGroup, ...] = (
    SpecializationGroup(
        "general physician",
        (
            "Influenza", "HIV/AIDS", "Dengue Fever", "Malaria", "Chickenpox",
            "Measles", "Mumps", "Rubella", "Zika Virus", "Ebola", "COVID-19",
            "Chlamydia", "Gonorrhea", "Syphilis", "Herpes",
            "Human Papillomavirus (HPV)", "Tetanus", "Rabies", "Polio",
            "Yellow Fever", "Smallpox", "Typhoid Fever", "Leprosy", "Plague",
            "Meningitis", "Encephalitis",
        ),
        ("fever", "high fever", "chills", "fatigue", "body aches", "headache",
         "sore throat", "swollen glands", "skin rash", "nausea",
         "loss of appetite", "night sweats", "cough"),
    ),
    SpecializationGroup(
        "pulmonologist",
        ("Asthma", "Tuberculosis", "Bronchitis", "Pneumonia",
         "Pulmonary Embolism", "Sleep Apnea", "Sarcoidosis"),
        ("persistent cough", "shortness of breath", "wheezing",
         "chest tightness", "coughing up phlegm", "loud snoring",
         "daytime sleepiness", "difficulty breathing at night"),
    ),
    SpecializationGroup(
        "cardiologist",
        (
            "Hypertension", "Coronary Artery Disease", "Heart Failure",
            "Atrial Fibrillation", "Cardiomyopathy", "Angina",
            "Atherosclerosis", "Pericarditis", "Myocarditis", "Endocarditis",
            "Congenital Heart Disease", "Valvular Heart Disease",
            "Peripheral Artery Disease", "Deep Vein Thrombosis",
            "Varicose Veins", "Hypertensive Heart Disease",
            "Coronary Microvascular Disease", "Dyslipidemia",
            "Familial Hypercholesterolemia", "Hypertrophic Cardiomyopathy",
            "Dilated Cardiomyopathy", "Restrictive Cardiomyopathy",
            "Takotsubo Cardiomyopathy",
        ),
        ("chest pain", "palpitations", "shortness of breath on exertion",
         "swollen ankles", "dizziness", "irregular heartbeat",
         "leg pain while walking", "racing heart"),
    ),
    SpecializationGroup(
        "gastroenterologist",
        ("Hepatitis B", "Hepatitis C", "Crohn's Disease", "Ulcerative Colitis",
         "Gastroesophageal Reflux Disease (GERD)", "Celiac Disease",
         "Hemochromatosis", "Appendicitis", "Hemorrhoids", "Diverticulitis",
         "Irritable Bowel Syndrome (IBS)"),
        ("abdominal pain", "bloating", "heartburn", "diarrhea", "constipation",
         "blood in stool", "nausea after meals", "stomach cramping",
         "loss of appetite"),
    ),
    SpecializationGroup(
        "neurologist",
        (
            "Stroke", "Alzheimer's Disease", "Parkinson's Disease",
            "Multiple Sclerosis", "Insomnia", "Narcolepsy",
            "Restless Leg Syndrome", "Epilepsy", "Migraine",
            "Cluster Headache", "Tension Headache", "Trigeminal Neuralgia",
            "Multiple System Atrophy",
            "Amyotrophic Lateral Sclerosis (ALS)", "Huntington's Disease",
            "Dystonia", "Myasthenia Gravis", "Guillain-Barre Syndrome",
            "Spinal Muscular Atrophy", "Muscular Dystrophy",
        ),
        ("recurring headaches", "dizziness", "hand tremors",
         "intermittent weakness", "numbness in limbs", "tingling sensation",
         "memory lapses", "muscle weakness", "trouble with coordination",
         "facial pain", "trouble sleeping"),
    ),
    SpecializationGroup(
        "oncologist",
        (
            "Cancer", "Prostate Cancer", "Breast Cancer", "Lung Cancer",
            "Colorectal Cancer", "Pancreatic Cancer", "Liver Cancer",
            "Leukemia", "Lymphoma", "Myeloma", "Esophageal Cancer",
            "Gastric Cancer", "Ovarian Cancer", "Cervical Cancer",
            "Endometrial Cancer", "Bladder Cancer", "Kidney Cancer",
            "Testicular Cancer", "Thyroid Cancer", "Mesothelioma",
            "Brain Tumors", "Spinal Cord Tumors",
        ),
        ("unexplained weight loss", "persistent fatigue",
         "a lump that keeps growing", "night sweats", "loss of appetite",
         "unusual bleeding"),
    ),
    SpecializationGroup(
        "rheumatologist",
        (
            "Arthritis", "Lupus", "Rheumatoid Arthritis", "Gout",
            "Fibromyalgia", "Chronic Fatigue Syndrome",
            "Complex Regional Pain Syndrome", "Sjogren's Syndrome",
            "Raynaud's Disease", "Scleroderma",
            "Mixed Connective Tisse Disease", "Behcet's Disease",
            "Wegener's Granulomatosis", "Giant Cell Arteritis",
            "Polyarteritis Nodosa",
        ),
        ("joint pain", "joint stiffness", "swollen joints",
         "morning stiffness", "muscle aches", "widespread pain",
         "cold fingers turning white", "dry eyes"),
    ),
    SpecializationGroup(
        "hematologist",
        ("Anemia", "Hemophilia", "Sickle Cell Disease", "Thalassemia"),
        ("easy bruising", "prolonged bleeding", "constant tiredness",
         "pale skin", "shortness of breath on mild effort"),
    ),
    SpecializationGroup(
        "endocrinologist",
        ("Diabetes Mellitus", "Hypothyroidism", "Hyperthyroidism",
         "Cushing's Syndrome", "Addison's Disease"),
        ("increased thirst", "frequent urination", "unexplained weight gain",
         "unexplained weight loss", "feeling cold all the time",
         "excessive sweating", "constant fatigue"),
    ),
    SpecializationGroup(
        "dermatologist",
        ("Psoriasis", "Eczema", "Vitiligo", "Alopecia", "Skin Cancer",
         "Melanoma", "Basal Cell Carcinoma", "Squamous Cell Carcinoma"),
        ("itchy skin", "red patches", "dry flaky skin", "hair loss",
         "skin discoloration", "a mole that changed shape",
         "persistent rash"),
    ),
    SpecializationGroup(
        "ophthalmologist",
        ("Glaucoma", "Cataracts", "Macular Degeneration"),
        ("blurry vision", "eye pain", "halos around lights",
         "gradual loss of side vision", "cloudy vision"),
    ),
    SpecializationGroup(
        "ENT specialist",
        ("Sinusitis", "Otitis Media", "Tonsillitis"),
        ("ear pain", "sore throat", "difficulty swallowing", "blocked nose",
         "facial pressure", "reduced hearing"),
    ),
    SpecializationGroup(
        "urologist",
        ("Kidney Stones", "Chronic Kidney Disease", "Renal Failure"),
        ("lower back pain", "painful urination", "blood in urine",
         "reduced urine output", "swelling in legs"),
    ),
    SpecializationGroup(
        "orthopedist",
        ("Osteoporosis", "Osteopenia", "Temporomandibular Joint Disorders"),
        ("bone pain", "a fracture from a minor fall", "jaw pain",
         "clicking jaw", "loss of height", "stooped posture"),
    ),
)

# Dietician bookings are symptom-driven rather than disease-driven.
DIETICIAN_SYMPTOMS: tuple[str, ...] = (
    "bloating", "heartburn", "loss of appetite", "indigestion",
    "feeling full too quickly", "unintended weight change",
    "low energy after meals", "acid reflux at night",
)

DISEASES: tuple[str, ...] = tuple(d for g in GROUPS for d in g.diseases)

_GROUP_BY_DISEASE = {d: g for g in GROUPS for d in g.diseases}

# extra phrases seen in real queries but absent from the pools above
_EXTRA_LEXICON = (
    "fever", "cough", "mild cough", "slight fever", "weakness", "hand shakes",
    "vomiting", "sore muscles", "runny nose", "chest pain",
)

SYMPTOM_LEXICON: frozenset[str] = frozenset(
    s for g in GROUPS for s in g.symptoms
) | frozenset(DIETICIAN_SYMPTOMS) | frozenset(_EXTRA_LEXICON)


def specialization_for(disease: str) -> str:
    return _GROUP_BY_DISEASE[disease].specialization


def specialization_for_symptoms(symptoms: Iterable[str]) -> str:
    """Best-matching specialization for a set of symptom phrases.

    Diet-related complaints route to a dietician; otherwise the group
    sharing the most phrases wins, first group breaking ties. With no
    overlap at all the safe default is a general physician.
    """
    wanted = {s.lower() for s in symptoms}
    if wanted and wanted <= set(DIETICIAN_SYMPTOMS):
        return "dietician"
    best, best_count = "general physician", 0
    for group in GROUPS:
        count = len(wanted & set(group.symptoms))
        if count > best_count:
            best, best_count = group.specialization, count
    return best


def sample_symptoms(disease: str, rng: Random, k: int = 3) -> list[str]:
    pool = _GROUP_BY_DISEASE[disease].symptoms
    k = min(k, len(pool))
    return rng.sample(list(pool), k)
