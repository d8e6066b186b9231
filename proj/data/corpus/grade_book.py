GRADE_BOUNDS = [(90, "A"), (80, "B"), (70, "C"), (60, "D")]


def letter(score):
    for bound, mark in GRADE_BOUNDS:
        if score >= bound:
            return mark
    return "F"


class GradeBook:
    def __init__(self):
        self.scores = {}

    def record(self, student, *marks):
        self.scores.setdefault(student, []).extend(marks)

    def average(self, student):
        marks = self.scores.get(student)
        if not marks:
            return None
        return sum(marks) / len(marks)

    def report(self):
        rows = []
        for student in sorted(self.scores):
            avg = self.average(student)
            rows.append(f"{student}: {avg:.1f} ({letter(avg)})")
        return "\n".join(rows)

    def honours(self, cutoff=85):
        return [s for s in sorted(self.scores) if (a := self.average(s)) is not None and a >= cutoff]
