import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vid2dialog.dialogue import (
    ActionType,
    Conversation,
    DialogueTurn,
    SpeechStyle,
    TurnKind,
    generate,
    generate_clarifications,
    parse_script,
    validate,
    word_count,
)
from vid2dialog.errors import CoverageFailure, UnparseableCompletion
from vid2dialog.instruction import InstructionSet, InstructionStep, Provenance
from vid2dialog.llm import Completion

TEA = ["Fill the kettle", "Boil the water", "Place the tea bag in the mug", "Pour hot water into the mug", "Add honey"]


class Scripted:
    def __init__(self, *answers):
        self.answers = list(answers)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        return Completion(self.answers.pop(0), "stop", request.fingerprint)


def make_set(texts=TEA, corrections=(), caveats=None):
    caveats = caveats or {}
    steps = [
        InstructionStep(i, t, is_correction=i in corrections, caveats=list(caveats.get(i, [])))
        for i, t in enumerate(texts, start=1)
    ]
    return InstructionSet("tea", "rec", steps, Provenance.ANNOTATION_MERGE)


def script(n, errors=(), skip=(), words=3):
    filler = " ".join(["please"] * max(0, words - 2))
    lines = ["#init", "USER: How do I make tea?", "EXPERT: Let's start."]
    for k in range(1, n + 1):
        if k in skip:
            continue
        if k in errors:
            lines += [f"#error={k}", "USER: I poured sugar instead of honey.", "EXPERT: Scoop the sugar out first."]
        lines += [f"#step={k}", f"USER: next {filler}".rstrip(), f"EXPERT: Do step {k}."]
    lines += ["#closing", "USER: All done.", "EXPERT: Enjoy your tea."]
    return "\n".join(lines)


def test_follow_conversation_covers_every_step():
    iset = make_set()
    conv = generate(iset, "regular", "follow", Scripted(script(5)))
    assert len(conv) == 7
    assert conv.turns[0].kind is TurnKind.TASK_INIT
    assert conv.turns[-1].kind is TurnKind.CLOSING
    assert [t.step_ordinal for t in conv.step_turns()] == [1, 2, 3, 4, 5]
    assert validate(conv, iset).ok


def test_error_mode_has_error_report():
    iset = make_set(corrections={5})
    client = Scripted(script(5, errors={5}))
    conv = generate(iset, SpeechStyle.REGULAR, ActionType.ERROR, client)
    reports = [t for t in conv.turns if t.kind is TurnKind.ERROR_REPORT]
    assert len(reports) == 1
    assert "sugar instead of honey" in reports[0].user_text
    assert reports[0].expert_text
    assert "[[CORRECTION]] 5. Add honey" in client.requests[0].user_text
    assert validate(conv, iset).ok


def test_error_mode_needs_corrections():
    with pytest.raises(ValueError):
        generate(make_set(), "regular", "error", Scripted())


def test_coverage_failure_regenerates_once():
    client = Scripted(script(5, skip={3}), script(5))
    conv = generate(make_set(), "concise", "follow", client)
    assert len(conv.step_turns()) == 5
    assert [r.attempt for r in client.requests] == [0, 1]
    with pytest.raises(CoverageFailure):
        generate(make_set(), "concise", "follow", Scripted(script(5, skip={3}), script(5, skip={2})))


def test_unparseable_after_retry():
    with pytest.raises(UnparseableCompletion):
        generate(make_set(), "concise", "follow", Scripted("no script", "still none"))


def test_parse_script_tolerates_markdown_and_wrapping():
    pairs = parse_script("**User:** hello\nthere\n**Expert:** hi\n#step=1\nUSER: a\nEXPERT: b\nmore b")
    assert pairs == [(None, None, "hello there", "hi"), (TurnKind.STEP, 1, "a", "b more b")]
    with pytest.raises(UnparseableCompletion):
        parse_script("EXPERT: out of nowhere")
    with pytest.raises(UnparseableCompletion):
        parse_script("USER: only a question")


def test_validate_reports_violations():
    iset = make_set()
    conv = generate(iset, "regular", "follow", Scripted(script(5)))
    dropped = Conversation(
        [t for t in conv.turns if t.step_ordinal != 3], conv.task, conv.style, conv.action_type, conv.source_recording_id
    )
    assert "step 3 uncovered" in validate(dropped, iset).messages()
    err = DialogueTurn(2, "oops", "fix it", TurnKind.ERROR_REPORT, 1)
    follow = Conversation([conv.turns[0], err] + conv.turns[1:], "tea", "regular", "follow", "rec")
    assert "error mode" in validate(follow, iset).kinds()


def test_turn_invariants_are_reported():
    iset = make_set(["a", "b"])
    turns = [
        DialogueTurn(1, "how?", "like this", TurnKind.TASK_INIT),
        DialogueTurn(2, " ", "do a", TurnKind.STEP, 1),
        DialogueTurn(3, "next", "do b", TurnKind.STEP, None),
        DialogueTurn(4, "done", "great", TurnKind.CLOSING),
    ]
    report = validate(Conversation(turns, "tea", "regular", "follow", "rec"), iset)
    assert "turn 2 has empty user text" in report.messages()
    assert "step turn 3 has no step ordinal" in report.messages()
    assert "step 2 uncovered" in report.messages()


def test_clarification_after_its_step():
    iset = make_set(caveats={2: ["the filter must form a semicircle"]})
    answer = "#clarify=2\nUSER: What shape should the filter have?\nEXPERT: The filter must form a semicircle."
    conv = generate(iset, "regular", "follow", Scripted(script(5), answer))
    pos = next(i for i, t in enumerate(conv.turns) if t.kind is TurnKind.CLARIFICATION)
    assert conv.turns[pos - 1].step_ordinal == 2 and conv.turns[pos - 1].kind is TurnKind.STEP
    assert "semicircle" in conv.turns[pos].expert_text
    assert [t.index for t in conv.turns] == list(range(1, 9))
    assert validate(conv, iset).ok


def test_two_caveats_make_two_consecutive_turns():
    iset = make_set(caveats={4: ["water should be hot", "do not overfill"]})
    clar = generate_clarifications(iset, Scripted("garbled"))
    assert [t.step_ordinal for t in clar] == [4, 4]
    assert [t.expert_text for t in clar] == ["water should be hot", "do not overfill"]
    conv = generate(iset, "regular", "follow", Scripted(script(5), "garbled"))
    kinds = [t.kind for t in conv.turns]
    i = kinds.index(TurnKind.CLARIFICATION)
    assert kinds[i : i + 2] == [TurnKind.CLARIFICATION] * 2


def test_no_caveats_no_clarifications():
    assert generate_clarifications(make_set(), Scripted()) == []


def test_style_hint_changes_prompt():
    a = Scripted(script(5))
    b = Scripted(script(5))
    generate(make_set(), "concise", "follow", a)
    generate(make_set(), "regular", "follow", b)
    assert a.requests[0].user_text != b.requests[0].user_text


def test_word_count_ignores_punctuation():
    assert word_count("Okay -- what now ?") == 3


def test_conversation_round_trip():
    conv = generate(make_set(corrections={2}), "concise", "error", Scripted(script(5, errors={2})))
    assert Conversation.from_dict(conv.to_dict()) == conv


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.data())
def test_generated_conversations_are_bijective(n, data):
    corrections = set(data.draw(st.lists(st.integers(1, n), max_size=n, unique=True)))
    iset = make_set([f"step number {k}" for k in range(1, n + 1)], corrections=corrections)
    mode = ActionType.ERROR if corrections else ActionType.FOLLOW
    conv = generate(iset, "regular", mode, Scripted(script(n, errors=corrections if corrections else ())))
    ordinals = [t.step_ordinal for t in conv.step_turns()]
    assert ordinals == list(range(1, n + 1))
    has_errors = any(t.kind is TurnKind.ERROR_REPORT for t in conv.turns)
    assert has_errors == (mode is ActionType.ERROR)
    assert validate(conv, iset).ok


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.data())
def test_validate_catches_any_missing_step(n, data):
    k = data.draw(st.integers(1, n))
    iset = make_set([f"s{i}" for i in range(1, n + 1)])
    good = generate(iset, "regular", "follow", Scripted(script(n)))
    turns = [t for t in good.turns if t.step_ordinal != k]
    broken = Conversation(turns, "tea", "regular", "follow", "rec")
    assert f"step {k} uncovered" in validate(broken, iset).messages()
