"""A full scripted lesson on the virtual clock, audited offline.

Runs the bundled teacher+student scenario (intro, five kanji of rising
difficulty, quiz), records the wire trace, re-checks every invariant from
the file alone, and reconstructs the teacher's ambient display values.

Run: python demos/05_simulated_lesson.py
"""

from pathlib import Path

from pulseboard import check_trace, emit_display_csv, load_scenario, read_trace, run_scenario

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)
trace_path = OUT / "lesson_dyad.jsonl"

scenario = load_scenario("lesson_dyad")
print(f"scenario {scenario.name!r}: {len(scenario.participants)} participants, "
      f"{len(scenario.actions)} scripted actions over {scenario.duration_s:.0f} s of lesson time")

result = run_scenario(scenario, record=True, out_path=str(trace_path))
print(f"exit status {result.exit_status}; phases: INTRO -> {' -> '.join(result.phases_seen)}")

session = result.session
print(f"kanji taught: {' '.join(item.label for item in session.script.items)}")
print(f"quiz: {session.quiz.correct}/5 correct")
print(f"sequenced messages: {session.seq}; trace: {trace_path}")

advisories = result.clients["teacher"].advisories
relax = [a for a in advisories if a["advisory"] == "RELAX"]
print(f"\npacing advisories to the teacher: {len(advisories)} total, {len(relax)} said RELAX")
if relax:
    first = relax[0]
    print(f"  first RELAX: student SCR activity {first['scr_rate']:.1f}/min over threshold {first['threshold']}/min")

print("\noffline audit of the recorded trace:")
report = check_trace(read_trace(str(trace_path)))
for line in report.lines():
    print(f"  {line}")

csv_text = emit_display_csv(read_trace(str(trace_path)), "student")
csv_path = OUT / "student_display.csv"
csv_path.write_text(csv_text)
print(f"\npeer-visible display of the student reconstructed: {len(csv_text.splitlines()) - 1} rows -> {csv_path}")

# Determinism: the same scenario and seed produce the same bytes.
again = OUT / "lesson_dyad_again.jsonl"
run_scenario(load_scenario("lesson_dyad"), record=True, out_path=str(again))
identical = trace_path.read_bytes() == again.read_bytes()
print(f"re-run with the same seed is byte-identical: {identical}")
again.unlink()
