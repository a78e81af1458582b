import random
from datetime import date, datetime

import pytest
import yaml

from hcsum.dataset import (
    AssemblyError,
    DEFAULT_PROMPT_TEMPLATE,
    FilterThresholds,
    PromptTemplateError,
    Split,
    SplitPlan,
    SummaryPair,
    assemble_emr,
    build_prompt,
    emit_finetune_config,
    filter_pairs,
    read_pairs,
    split_dataset,
    split_sizes,
    write_pairs,
)
from hcsum.ingest import AdmissionBundle, NoteCategory, NoteEvent
from hcsum.sections import ExtractedSection, SectionKind
from hcsum.tokenizers import TokenCount

ADMIT = date(2119, 1, 16)


def _note(row_id, day_offset, category=NoteCategory.NURSING_PROGRESS):
    d = date(2119, 1, 16 + day_offset)
    return NoteEvent(
        row_id=row_id, subject_id=3, hadm_id=44, chart_date=d,
        chart_time=datetime(d.year, d.month, d.day, 9 + row_id % 8),
        category=category, raw_category="", description="", text="",
    )


def _section(kind, text, row_id):
    return ExtractedSection(kind=kind, text=text, span=(0, len(text)), source_row_id=row_id)


def _bundle(notes):
    return AdmissionBundle(hadm_id=44, subject_id=3, admission_date=ADMIT, notes=tuple(notes))


def _pair(hadm, bhc=60, inp=600, subject=None):
    return SummaryPair(
        hadm_id=hadm,
        subject_id=subject if subject is not None else hadm,
        input_text="x",
        bhc_text="y",
        input_tokens=TokenCount(inp, "ws"),
        bhc_tokens=TokenCount(bhc, "ws"),
    )


class TestAssembleEmr:
    def test_full_block_order(self):
        notes = [
            _note(1, 0),
            _note(2, 1),
            _note(3, 4, NoteCategory.DISCHARGE_SUMMARY),
        ]
        sections = {
            3: [
                _section(SectionKind.CHIEF_COMPLAINT, "chest pain", 3),
                _section(SectionKind.HISTORY_OF_PRESENT_ILLNESS, "65 year old with hypertension", 3),
                _section(SectionKind.PHYSICAL_EXAM, "alert, oriented", 3),
                _section(SectionKind.DISCHARGE_DIAGNOSIS, "myocardial infarction", 3),
                _section(SectionKind.MAJOR_PROCEDURE, "cardiac catheterization", 3),
                _section(SectionKind.DISCHARGE_DISPOSITION, "home", 3),
            ],
            1: [_section(SectionKind.ASSESSMENT_AND_PLAN, "monitor overnight", 1)],
            2: [_section(SectionKind.ASSESSMENT_AND_PLAN, "start beta blocker", 2)],
        }
        text = assemble_emr(_bundle(notes), sections)
        assert text.startswith("Admission day:")
        idx = [text.index(marker) for marker in ("Admission day:", "Day 1:", "Day 2:", "Discharge day:")]
        assert idx == sorted(idx)
        assert "Reason for hospitalization is chest pain." in text
        assert "History of present illness: 65 year old with hypertension." in text
        assert "Day 1: monitor overnight" in text
        assert "Day 2: start beta blocker" in text
        assert "Patient physical examination alert, oriented." in text
        assert "Patient is diagnosed myocardial infarction, received cardiac catheterization in hospital." in text
        assert "Patient is discharged to home." in text

    def test_hpi_only_gives_admission_block_only(self):
        notes = [_note(1, 0, NoteCategory.DISCHARGE_SUMMARY)]
        sections = {1: [_section(SectionKind.HISTORY_OF_PRESENT_ILLNESS, "frail elderly patient", 1)]}
        text = assemble_emr(_bundle(notes), sections)
        assert text.startswith("Admission day:")
        assert "Day " not in text
        assert "Discharge day:" not in text

    def test_dates_rendered_relative(self):
        notes = [_note(1, 1)]
        sections = {1: [_section(SectionKind.ASSESSMENT_AND_PLAN, "ECG on [**2119-01-17**] clean", 1)]}
        text = assemble_emr(_bundle(notes), sections)
        assert "Day 2" in text
        assert "[**" not in text

    def test_no_sections_rejected(self):
        with pytest.raises(AssemblyError):
            assemble_emr(_bundle([_note(1, 0)]), {})

    def test_bhc_never_joins_input(self):
        notes = [_note(1, 0, NoteCategory.DISCHARGE_SUMMARY)]
        sections = {
            1: [
                _section(SectionKind.BRIEF_HOSPITAL_COURSE, "SECRET GROUND TRUTH", 1),
                _section(SectionKind.CHIEF_COMPLAINT, "fever", 1),
            ]
        }
        text = assemble_emr(_bundle(notes), sections)
        assert "SECRET GROUND TRUTH" not in text

    def test_empty_days_omitted(self):
        notes = [_note(1, 0), _note(2, 3)]
        sections = {
            1: [_section(SectionKind.ASSESSMENT_AND_PLAN, "stable", 1)],
            2: [_section(SectionKind.ASSESSMENT_AND_PLAN, "improving", 2)],
        }
        text = assemble_emr(_bundle(notes), sections)
        assert "Day 1: stable" in text
        assert "Day 2" not in text and "Day 3" not in text
        assert "Day 4: improving" in text


class TestFilterPairs:
    def test_bhc_boundary(self):
        kept, dropped = filter_pairs([_pair(1, bhc=49, inp=600)], FilterThresholds())
        assert kept == []
        assert dropped[0][1] == ["bhc_below_min"]

    def test_inclusive_keep(self):
        kept, dropped = filter_pairs([_pair(1, bhc=50, inp=500)], FilterThresholds())
        assert len(kept) == 1 and dropped == []

    def test_both_reasons_recorded(self):
        _, dropped = filter_pairs([_pair(1, bhc=10, inp=10)], FilterThresholds())
        assert dropped[0][1] == ["bhc_below_min", "input_below_min"]

    def test_planted_violators(self):
        rng = random.Random(5)
        pairs = []
        for i in range(1000):
            if i < 32:
                bhc, inp = rng.choice([(49, 600), (60, 499), (1, 1)])
            else:
                bhc, inp = rng.randrange(50, 200), rng.randrange(500, 4000)
            pairs.append(_pair(i, bhc=bhc, inp=inp))
        kept, dropped = filter_pairs(pairs, FilterThresholds())
        assert len(kept) == 968
        brute = [p for p in pairs if p.bhc_tokens.count >= 50 and p.input_tokens.count >= 500]
        assert kept == brute

    def test_thresholds_must_be_positive(self):
        with pytest.raises(ValueError):
            FilterThresholds(bhc_min=0)


class TestSplitDataset:
    def test_exact_sizes_100(self):
        assert split_sizes(100, (0.85, 0.10, 0.05)) == (85, 10, 5)

    def test_exact_sizes_paper_n(self):
        assert split_sizes(33255, (0.85, 0.10, 0.05)) == (28266, 3325, 1664)

    def test_partition_exact(self):
        pairs = [_pair(i) for i in range(100)]
        labeled = split_dataset(pairs, SplitPlan(seed=9))
        by_split = {s: [p.hadm_id for p in labeled if p.split is s] for s in Split}
        assert len(by_split[Split.TRAIN]) == 85
        assert len(by_split[Split.VALIDATION]) == 10
        assert len(by_split[Split.TEST]) == 5
        all_ids = sorted(sum(by_split.values(), []))
        assert all_ids == list(range(100))

    def test_same_seed_same_assignment(self):
        pairs = [_pair(i) for i in range(50)]
        runs = [split_dataset(pairs, SplitPlan(seed=7)) for _ in range(3)]
        assert runs[0] == runs[1] == runs[2]

    def test_assignment_independent_of_input_order(self):
        pairs = [_pair(i) for i in range(40)]
        shuffled = pairs[:]
        random.Random(3).shuffle(shuffled)
        a = {p.hadm_id: p.split for p in split_dataset(pairs, SplitPlan(seed=1))}
        b = {p.hadm_id: p.split for p in split_dataset(shuffled, SplitPlan(seed=1))}
        assert a == b

    def test_by_subject_leakage_guard(self):
        pairs = [_pair(i, subject=i // 2) for i in range(60)]
        labeled = split_dataset(pairs, SplitPlan(seed=4, unit="subject_id"))
        by_subject: dict[int, set] = {}
        for p in labeled:
            by_subject.setdefault(p.subject_id, set()).add(p.split)
        assert all(len(splits) == 1 for splits in by_subject.values())

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SplitPlan(fractions=(0.5, 0.5, 0.5))

    def test_fractions_must_be_a_triple(self):
        with pytest.raises(ValueError, match="train, validation, test"):
            SplitPlan(fractions=(0.5, 0.5))

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            split_dataset([], SplitPlan())


class TestBuildPrompt:
    def test_default_template_shape(self):
        prompt = build_prompt("X")
        assert "### Input note:\nX" in prompt
        assert prompt.endswith("### Response:")
        assert prompt.startswith("You are a helpful medical assistant.")

    def test_template_must_have_placeholder(self):
        with pytest.raises(PromptTemplateError):
            build_prompt("X", template="no placeholder here")

    def test_double_placeholder_rejected(self):
        with pytest.raises(PromptTemplateError):
            build_prompt("X", template="{input} {input}")

    def test_marker_collision_substituted_verbatim_and_flagged(self, caplog):
        import logging

        with caplog.at_level(logging.WARNING, logger="hcsum.dataset"):
            prompt = build_prompt("note with ### Response: inside")
        assert "note with ### Response: inside" in prompt
        assert any("response marker" in r.message for r in caplog.records)


class TestFinetuneRecipe:
    def test_recipe_hyperparameter_values(self, tmp_path):
        out = tmp_path / "recipe.yaml"
        emit_finetune_config(out)
        recipe = yaml.safe_load(out.read_text())
        assert recipe["lora"]["rank"] == 256
        assert recipe["lora"]["alpha"] == 512
        assert recipe["lora"]["dropout"] == 0.1
        assert recipe["lora"]["target_modules"] == [
            "q_proj", "k_proj", "v_proj", "o_proj", "gate_proj", "up_proj", "down_proj",
        ]
        assert recipe["quantization"]["load_in_4bit"] is True
        assert recipe["train"]["batch_size"] == 8
        assert recipe["train"]["learning_rate"] == 2e-5
        assert recipe["train"]["max_steps"] == 12000
        assert recipe["train"]["warmup_ratio"] == 0.05
        assert recipe["train"]["eval_steps"] == 1200
        assert recipe["train"]["weight_decay"] == 0.1
        assert recipe["train"]["dtype"] == "bf16"
        assert recipe["train"]["optimizer"] == "adamw_8bit"
        assert recipe["train"]["lr_scheduler"] == "cosine"
        assert recipe["train"]["seed"] == 3407

    def test_emission_deterministic(self, tmp_path):
        a, b = tmp_path / "a.yaml", tmp_path / "b.yaml"
        emit_finetune_config(a, header="v1")
        emit_finetune_config(b, header="v1")
        assert a.read_bytes() == b.read_bytes()


class TestRoundTrip:
    def test_serialize_then_parse_identical(self, tmp_path):
        pairs = split_dataset([_pair(i, bhc=60 + i, inp=600 + i) for i in range(10)], SplitPlan(seed=2))
        path = tmp_path / "dataset.jsonl"
        write_pairs(path, pairs, meta={"config_digest": "abc"})
        loaded, meta = read_pairs(path)
        assert meta["config_digest"] == "abc"
        assert sorted(pairs, key=lambda p: p.hadm_id) == loaded
