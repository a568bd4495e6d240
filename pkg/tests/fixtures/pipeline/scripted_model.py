"""
A deterministic stand-in for a chat-completion endpoint, used to record the
fixture cassettes. It recognises each pipeline prompt by its wording and
answers in the format that prompt asks for.
"""

import json
import re

import httpx

EXTRACTIONS = {
    "coffee": [
        """1. Boil water in the kettle. [cues: 2]
2. Fold the paper filter into a semicircle. [cues: 3]
   - caveat: The filter has to form a semicircle, otherwise it will not sit in the dripper.
3. Place the filter in the dripper. [cues: 4]
4. Set the dripper on the mug. [cues: 4]
5. Grind the coffee beans until they are medium fine. [cues: 5]
6. Add the coffee grounds to the filter. [cues: 6]
7. Pour the hot water slowly over the grounds. [cues: 7]
8. Remove the dripper once the water has drained. [cues: 8]""",
    ],
    # first answer joins two actions, so the pipeline re-asks with the strict prompt
    "change tire": [
        """1. Apply the parking brake. [cues: 1]
2. Loosen the lug nuts, then raise the car with the jack. [cues: 2-3]
3. Remove the flat tire. [cues: 4]
4. Put on the spare tire. [cues: 5]
5. Lower the car. [cues: 6]""",
        """1. Apply the parking brake. [cues: 1]
2. Loosen the lug nuts with the wrench. [cues: 2]
3. Raise the car with the jack. [cues: 3]
4. Remove the lug nuts. [cues: none]
5. Pull off the flat tire. [cues: 4]
6. Mount the spare tire on the wheel studs. [cues: 5]
7. Thread the lug nuts on by hand. [cues: 5]
8. Lower the car to the ground. [cues: 6]
9. Tighten the lug nuts fully with the wrench. [cues: 7]
   - caveat: Tighten the nuts in a star pattern so the wheel seats evenly.""",
    ],
}

REWRITES = {
    ("tea", "fill kettle with water"): "Fill the kettle with water.",
    ("tea", "turn on kettle"): "Turn on the kettle.",
    ("tea", "place tea bag in mug"): "Place the tea bag in the mug.",
    ("tea", "pour hot water into mug"): "Pour the hot water into the mug.",
    ("tea", "steep tea bag"): "Let the tea bag steep for a few minutes.",
    ("tea", "remove tea bag"): "Remove the tea bag from the mug.",
    ("tea", "add honey"): "Add honey to the tea.",
    ("tea", "stir"): "Stir the tea.",
    ("oatmeal", "measure oats into bowl"): "Measure the oats into the bowl.",
    ("oatmeal", "add water to bowl"): "Add water to the bowl.",
    ("oatmeal", "microwave bowl"): "Microwave the bowl for two minutes.",
    ("oatmeal", "add sugar"): "Pour sugar into the bowl.",
    ("oatmeal", "scoop out sugar"): "Scoop the sugar out of the bowl.",
    ("oatmeal", "add honey"): "Add honey to the oatmeal.",
    ("oatmeal", "stir"): "Stir the oatmeal.",
}

ERROR_TURNS = {
    "Pour sugar into the bowl.": (
        "Oops, I just poured sugar instead of honey into the oats.",
        "No problem. Scoop the sugar back out before you add anything else.",
    ),
    "Scoop the sugar out of the bowl.": (
        "I scooped most of the sugar out again, is that good enough?",
        "Yes, a little sugar left is fine. Now you can add the honey.",
    ),
}

CONCISE_USER = ["Done.", "Okay, done.", "Done. Next?", "Finished that.", "Got it."]
REGULAR_USER = [
    "Okay, I have done that, what should I do next now?",
    "Alright, that part is finished now, what comes after it?",
    "I think I got that done, so what is the next step?",
    "That went fine, I am ready to move on to the next one.",
    "Finished with that one, can you tell me what to do next?",
]


def _lower_first(text):
    return text[:1].lower() + text[1:]


def _task(prompt):
    m = re.search(r"^Task: (.+)$", prompt, re.MULTILINE)
    return m.group(1).strip().replace("_", " ") if m else ""


def _steps(block):
    out = []
    for line in block.splitlines():
        m = re.match(r"^(\[\[CORRECTION\]\] )?(\d+)\. (.+)$", line.strip())
        if m:
            out.append((int(m.group(2)), m.group(3), bool(m.group(1))))
    return out


def extract(user):
    answers = EXTRACTIONS[_task(user)]
    strict = "could not be used" in user
    return answers[min(int(strict), len(answers) - 1)]


def normalize(user):
    task = _task(user)
    labels = [text for _, text, _ in _steps(user.split("imperative sentence:", 1)[1])]
    return "\n".join(f"{i}. {REWRITES.get((task, lab), lab.capitalize() + '.')}" for i, lab in enumerate(labels, 1))


def cluster(user):
    count = int(re.search(r"each of the (\d+) pairs", user).group(1))
    return "\n".join(f"{i}: no" for i in range(1, count + 1))


def dialogue(user):
    task = _task(user)
    steps = _steps(user.split("Write the conversation", 1)[0])
    concise = "User speaking style: concise" in user
    error = "makes a mistake" in user
    users = CONCISE_USER if concise else REGULAR_USER
    lines = [
        "#init",
        f"USER: {'How do I make ' + task + '?' if concise else 'Hi, I would like to make ' + task + ' today, can you walk me through it?'}",
        f"EXPERT: Sure. First, {_lower_first(steps[0][1])}",
    ]
    if task == "change tire":
        lines[1] = "USER: " + ("Flat tire. Help?" if concise else "Hi, I have a flat tire, can you help me change it please?")
    for k, text, corrective in steps:
        if error and corrective:
            u, e = ERROR_TURNS.get(text, ("I think I got something wrong here.", f"Let's fix it: {_lower_first(text)}"))
            lines += [f"#error={k}", f"USER: {u}", f"EXPERT: {e}"]
        nxt = f"Good. Next, {_lower_first(steps[k][1])}" if k < len(steps) else "Great, that was the last step."
        lines += [f"#step={k}", f"USER: {users[(k - 1) % len(users)]}", f"EXPERT: {nxt}"]
    closing = "All done. Thanks!" if concise else "Everything is done now, thank you so much for your help with this!"
    lines += ["#closing", f"USER: {closing}", f"EXPERT: You're welcome, enjoy your {task}."]
    return "\n".join(lines)


def clarify(user):
    out = []
    for m in re.finditer(r"^step (\d+): (.+?) \| caveat: (.+)$", user, re.MULTILINE):
        k, step, caveat = m.groups()
        out += [f"#clarify={k}", f"USER: Is there anything to watch out for when I {_lower_first(step).rstrip('.')}?", f"EXPERT: {caveat}"]
    return "\n".join(out)


def assist(system, user):
    n_turn = user.count("USER:")
    last = user.rsplit("USER:", 1)[1].lower()
    if any(w in last for w in ("instead", "oops", "wrong")):
        return "Let's fix that first, then carry on with the next step."
    if "full instructions" not in system:
        if n_turn == 1:
            return "Sure. Let's start with the first step of the task."
        return "Good. Now go on with the next step of the task."
    steps = _steps(system.split("full instructions for this task are:", 1)[1])
    if n_turn == 1:
        return f"Sure. First, {_lower_first(steps[0][1])}"
    k = min(n_turn, len(steps))
    if n_turn > len(steps):
        return "That was the last step, you are done."
    return f"Good. Next, {_lower_first(steps[k - 1][1])}"


def _tokens(text):
    return {w.strip(".,!?").lower() for w in text.split() if w.strip(".,!?")}


def grade(user):
    ref = re.search(r"Reference expert reply:\n(.*?)\n\nAssistant reply", user, re.S)
    cand = re.search(r"Assistant reply to grade:\n(.*?)\n\nExplain", user, re.S)
    if ref is None:
        return "I cannot compare without a reference.\nScore: 3"
    a, b = _tokens(ref.group(1)), _tokens(cand.group(1))
    overlap = len(a & b) / len(a | b) if a | b else 0.0
    score = 1 + round(4 * overlap)
    verdict = "gives the same next action as" if score >= 4 else "differs from"
    return f"The reply {verdict} the reference.\nScore: {score}"


def respond(system, user):
    if "extract the key steps" in system:
        return extract(user)
    if "fluent imperative sentence" in user:
        return normalize(user)
    if "same sub-task" in user:
        return cluster(user)
    if "#clarify=<k>" in user and "Write the conversation" in user:
        return dialogue(user)
    if "one exchange per caveat" in user:
        return clarify(user)
    if "grader" in system:
        if "did not end with a valid score" in user:
            return "Score: 3"
        return grade(user)
    if "smart glasses" in system:
        return assist(system, user)
    raise ValueError(f"unrecognised prompt: {user[:80]!r}")


def handler(request: httpx.Request) -> httpx.Response:
    body = json.loads(request.content)
    msgs = {m["role"]: m["content"] for m in body["messages"]}
    text = respond(msgs["system"], msgs["user"])
    return httpx.Response(200, json={"choices": [{"message": {"content": text}, "finish_reason": "stop"}]})


def transport():
    return httpx.MockTransport(handler)
