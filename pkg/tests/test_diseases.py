"""Disease catalogue: partition into specializations and symptom sampling."""

import random

import pytest

from health_agent.diseases import (
    DIETICIAN_SYMPTOMS,
    DISEASES,
    GROUPS,
    SYMPTOM_LEXICON,
    sample_symptoms,
    specialization_for,
)


class TestCatalogue:
    def test_one_hundred_fifty_three_diseases(self):
        assert len(DISEASES) == 153

    def test_no_duplicate_diseases(self):
        assert len(set(DISEASES)) == len(DISEASES)

    def test_groups_partition_the_catalogue(self):
        seen = []
        for group in GROUPS:
            seen.extend(group.diseases)
        assert len(seen) == len(set(seen)) == 153
        assert set(seen) == set(DISEASES)

    def test_every_group_has_a_symptom_pool(self):
        for group in GROUPS:
            assert group.diseases, group.specialization
            assert len(group.symptoms) >= 3, group.specialization

    def test_specializations_unique(self):
        names = [g.specialization for g in GROUPS]
        assert len(set(names)) == len(names)

    def test_specialization_for_every_disease(self):
        for group in GROUPS:
            for disease in group.diseases:
                assert specialization_for(disease) == group.specialization

    def test_specialization_for_unknown_raises(self):
        with pytest.raises(KeyError):
            specialization_for("Common Boredom")


class TestLexicon:
    def test_lowercase_phrases_only(self):
        for phrase in SYMPTOM_LEXICON:
            assert phrase == phrase.lower()
            assert phrase.strip() == phrase

    def test_contains_group_pools(self):
        for group in GROUPS:
            for phrase in group.symptoms:
                assert phrase in SYMPTOM_LEXICON

    def test_contains_dietician_symptoms(self):
        for phrase in DIETICIAN_SYMPTOMS:
            assert phrase in SYMPTOM_LEXICON


class TestSampling:
    def test_sample_draws_from_known_phrases(self):
        rng = random.Random(11)
        for disease in DISEASES[:20]:
            picked = sample_symptoms(disease, rng)
            assert len(picked) == 3
            assert len(set(picked)) == 3
            for phrase in picked:
                assert phrase in SYMPTOM_LEXICON

    def test_sample_is_seed_deterministic(self):
        a = sample_symptoms("Influenza", random.Random(5))
        b = sample_symptoms("Influenza", random.Random(5))
        assert a == b

    def test_sample_k_controls_count(self):
        assert len(sample_symptoms("Influenza", random.Random(1), k=2)) == 2
