"""Regenerate every packaged fixture under src/theorembench/fixtures/.

Run after changing template content or transcript plumbing:

    python tools/make_fixtures.py

Expected execution values are computed here from closed forms
(math.factorial / math.comb), independent of the executors under test.
Output is byte-deterministic.
"""

from __future__ import annotations

import json
import math
import sys
from itertools import product
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from theorembench.agents import request_digest  # noqa: E402
from theorembench.canonical import canonical_dumps  # noqa: E402
from theorembench.constraints import ParamBinding, is_prime  # noqa: E402
from theorembench.instances import instance_to_payload, instantiate  # noqa: E402
from theorembench.templates import parse_meta_template, template_to_payload  # noqa: E402
from theorembench.verification import ExecutionResult, build_script  # noqa: E402

FIXTURES = REPO / "src" / "theorembench" / "fixtures"

CAYLEY_PRIMES = [p for p in range(5, 380) if is_prime(p)]
assert len(CAYLEY_PRIMES) == 73 and CAYLEY_PRIMES[0] == 5 and CAYLEY_PRIMES[-1] == 379

CAYLEY = {
    "template_id": "abstract_algebra_cayley_graph_energy_001",
    "target_paper_module": (
        "Calculation of the energy of the Cayley graph \\Gamma_n(Sn) of the symmetric group Sn, "
        "as per Theorem 1.6(b) in Mahdi Ebrahimi, Journal of Algebra 687 (2026) 477-491"
    ),
    "core_math_concept": (
        "Formula for calculating the graph energy of the p-singular Cayley graph \\Gamma_n(Sn) on "
        "the symmetric group Sn (where n is a prime number): E(\\Gamma_n(Sn)) = 2^(n-1) * (n-1)!"
    ),
    "param_definition": [
        {
            "var_name": "n",
            "var_type": "Integer",
            "var_constraint": "n is a prime number, and $n \\in [5, 400]$ to ensure feasibility of computation",
            "var_source": "Randomly selected from the list of prime numbers",
        }
    ],
    "problem_template": (
        "Consider a graph $\\Delta$, whose vertex set is the symmetric group $S_{{n}}$ (i.e., the "
        "group of all permutations on the set \\{1, 2, ..., ${n}$ \\}). For any two vertices "
        "(permutations) $u, v \\in S_{{n}}$ in the graph, an edge is drawn between $u$ and $v$ if "
        "there exists an $n$-cycle $a \\in S_{{n}}$ (a cycle of length ${n}$) such that "
        "$v = a \\circ u$ (where $\\circ$ denotes the composition of permutations). Given that "
        "${n} = {n}$ is a prime number, calculate the Energy of the graph $\\Delta$. "
    ),
    "output_type": "Integer",
    "param_generation_rule": [
        "Step1: Randomly select an integer for the value of n from the list of prime numbers."
    ],
    "natural_lang_solution": (
        "Solution:\n"
        "1. First, identify the structure of the graph defined in the problem. The vertex set of "
        "the graph is $G = S_{n}$ (the symmetric group), and the connection set $X$ is the set of "
        "all $n$-cycles (permutations of length $n$) in $S_{n}$. By the definition of a Cayley "
        "graph, this graph is a Cayley graph, denoted as $Cay(S_{n}, X)$.\n"
        "2. Next, analyze the properties of the connection set $X$. According to group theory, the "
        "order of a permutation in $S_{n}$ is the least common multiple (LCM) of the lengths of "
        "its disjoint cycles. Since $n$ is a prime number, the necessary and sufficient condition "
        "for the order of an element in $S_{n}$ to be divisible by $n$ is that the element "
        "contains an $n$-cycle. Therefore, the connection set $X$ is precisely the set of all "
        "$n$-singular elements in $S_{n}$, i.e., $X = \\Omega_{n}(S_{n})$. Thus, the graph "
        "$\\Delta$ described in the problem is exactly the graph $\\Gamma_{n}(S_{n})$ defined in "
        "the referenced paper, which is the Cayley graph of the symmetric group with respect to "
        "the set of all $n$-cycles.\n"
        "3. According to Theorem 1.6(b) in the referenced cutting-edge paper, for a prime number "
        "$p$, when $p = n$, there is a precise calculation formula for the energy $E(\\Delta)$ of "
        "the Cayley graph $\\Gamma_{n}(S_{n})$:\n"
        "$$E(\\Delta) = 2^{(n-1)} \\cdot (n-1)!$$ \n"
        "4. Substitute the parameter $n = {n}$ into this formula for calculation.\n"
        "$$E(\\Delta) = 2^{({n}-1)} \\cdot ({n}-1)!$$ \n"
        "5. Calculate the factorial and the power to obtain the final numerical result."
    ),
    "formal_solution": (
        "import math\n\nn = {n}\n\n"
        "# According to Theorem 1.6(b), the energy E(\\Gamma__n(S_n)) = 2^(n-1) * (n-1)!\n"
        "result = (2**(n - 1)) * math.factorial(n - 1)\n\nprint(result)"
    ),
    "exact_expression": "2^({n}-1) * ({n}-1)!",
    "validation_rule": [
        {"type": "param_check", "rule": f"n in [{', '.join(str(p) for p in CAYLEY_PRIMES)}]"},
        {"type": "execution_check", "rule": "formal_solution executes without error"},
        {"type": "value_check", "rule": "result > 0"},
    ],
}

LATTICE = {
    "template_id": "combinatorics_lattice_path_count_001",
    "target_paper_module": "Counting monotone lattice paths in a rectangular grid",
    "core_math_concept": (
        "The number of monotone paths from (0,0) to (m,n) using unit right and up steps equals "
        "the binomial coefficient C(m+n, n) = (m+n)! / (m! * n!)"
    ),
    "param_definition": [
        {"var_name": "m", "var_type": "Integer", "var_constraint": "m ∈ [3, 7]", "var_source": "Grid width"},
        {"var_name": "n", "var_type": "Integer", "var_constraint": "n ∈ [3, 12]", "var_source": "Grid height"},
    ],
    "problem_template": (
        "A robot walks on the integer grid from $(0, 0)$ to $({m}, {n})$. Each move is one unit "
        "step to the right or one unit step up. How many distinct paths can the robot take?"
    ),
    "output_type": "Integer",
    "param_generation_rule": [
        "Step1: Pick m from the declared width pool.",
        "Step2: Pick n from the declared height pool.",
    ],
    "natural_lang_solution": (
        "Solution:\n"
        "1. Every path from $(0,0)$ to $({m}, {n})$ consists of exactly {m} right-steps and {n} "
        "up-steps in some order.\n"
        "2. A path is determined by choosing which of the {m} + {n} steps are up-steps.\n"
        "3. The count is the binomial coefficient $C({m}+{n}, {n}) = ({m}+{n})! / ({m}! \\cdot {n}!)$.\n"
        "4. Evaluate the factorials and divide."
    ),
    "formal_solution": "import math\n\nm = {m}\nn = {n}\n\nresult = math.comb(m + n, n)\n\nprint(result)",
    "exact_expression": "({m} + {n})! / ({m}! * {n}!)",
    "validation_rule": [
        {"type": "param_check", "rule": "m in [3, 4, 5, 6, 7]"},
        {"type": "param_check", "rule": "n in [3, 5, 8, 10, 12]"},
        {"type": "execution_check", "rule": "formal_solution executes without error"},
        {"type": "value_check", "rule": "result > 0"},
        {"type": "value_check", "rule": "result < 10^500"},
    ],
}

TRIANGULAR = {
    "template_id": "number_theory_triangular_number_001",
    "target_paper_module": "Closed form for the k-th triangular number",
    "core_math_concept": "The sum 1 + 2 + ... + k equals k(k+1)/2",
    "param_definition": [
        {"var_name": "k", "var_type": "Integer", "var_constraint": "k ∈ [10, 99]", "var_source": "Term count"}
    ],
    "problem_template": "Compute the sum of the first {k} positive integers: $1 + 2 + \\dots + {k}$.",
    "output_type": "Integer",
    "param_generation_rule": ["Step1: Pick k from the declared pool."],
    "natural_lang_solution": (
        "Solution:\n"
        "1. Pair the first and last terms: $1 + {k}$, then $2 + ({k}-1)$, and so on; every pair "
        "sums to {k} + 1.\n"
        "2. There are {k}/2 such pairs in total, so the sum is {k} \\cdot ({k}+1) / 2.\n"
        "3. Substitute and evaluate."
    ),
    "formal_solution": "k = {k}\n\nresult = k * (k + 1) // 2\n\nprint(result)",
    "exact_expression": "{k} * ({k} + 1) / 2",
    "validation_rule": [
        {"type": "param_check", "rule": "k in [10, 15, 20, 25, 30, 40, 50, 60, 75, 99]"},
        {"type": "execution_check", "rule": "formal_solution executes without error"},
        {"type": "value_check", "rule": "result > 0"},
    ],
}

COIN = {
    "template_id": "probability_two_heads_001",
    "target_paper_module": "Binomial probability of exactly two successes in fair Bernoulli trials",
    "core_math_concept": "P(exactly 2 heads in t fair flips) = C(t, 2) / 2^t",
    "param_definition": [
        {"var_name": "t", "var_type": "Integer", "var_constraint": "t ∈ [4, 30]", "var_source": "Flip count"}
    ],
    "problem_template": (
        "A fair coin is flipped {t} times. What is the probability that exactly two of the flips "
        "come up heads?"
    ),
    "output_type": "Real",
    "param_generation_rule": ["Step1: Pick t from the declared pool."],
    "natural_lang_solution": (
        "Solution:\n"
        "1. There are $2^{{t}}$ equally likely outcome sequences.\n"
        "2. Exactly two heads can be placed in $C({t}, 2) = {t}({t}-1)/2$ ways.\n"
        "3. The probability is therefore $({t} \\cdot ({t}-1)/2) / 2^{{t}}$.\n"
        "4. Evaluate as a decimal."
    ),
    "formal_solution": "t = {t}\n\nresult = (t * (t - 1) // 2) / (2 ** t)\n\nprint(result)",
    "exact_expression": "({t} * ({t} - 1) / 2) / 2^{t}",
    "validation_rule": [
        {"type": "param_check", "rule": "t in [4, 5, 6, 8, 10, 12, 16, 20, 24, 30]"},
        {"type": "execution_check", "rule": "formal_solution executes without error"},
        {"type": "value_check", "rule": "result > 0"},
        {"type": "value_check", "rule": "result < 1"},
    ],
}

SUBSETS = {
    "template_id": "combinatorics_subset_count_001",
    "target_paper_module": "Cardinality of the power set",
    "core_math_concept": "A set with s elements has exactly 2^s subsets",
    "param_definition": [
        {"var_name": "s", "var_type": "Integer", "var_constraint": "s ∈ [8, 64]", "var_source": "Ground set size"}
    ],
    "problem_template": (
        "A committee of any size (possibly empty, possibly everyone) is to be chosen from {s} "
        "distinct people. Express the number of possible committees."
    ),
    "output_type": "Expression",
    "param_generation_rule": ["Step1: Pick s from the declared pool."],
    "natural_lang_solution": (
        "Solution:\n"
        "1. Each person is either in the committee or not, independently of the others.\n"
        "2. That gives $2^{{s}}$ possible committees, counting the empty one.\n"
        "3. The closed form is $2^{{s}}$."
    ),
    "formal_solution": "s = {s}\n\nresult = 2 ** s\n\nprint(result)",
    "exact_expression": "2^{s}",
    "validation_rule": [
        {"type": "param_check", "rule": "s in [8, 10, 12, 16, 20, 24, 32, 40, 52, 64]"},
        {"type": "execution_check", "rule": "formal_solution executes without error"},
        {"type": "value_check", "rule": "result > 0"},
        {"type": "value_check", "rule": "result < 10^500"},
    ],
}

ALL_TEMPLATES = [CAYLEY, LATTICE, TRIANGULAR, COIN, SUBSETS]

# Closed-form oracles, one per template, keyed by template_id.
ORACLES = {
    CAYLEY["template_id"]: lambda p: str(2 ** (p["n"] - 1) * math.factorial(p["n"] - 1)),
    LATTICE["template_id"]: lambda p: str(math.comb(p["m"] + p["n"], p["n"])),
    TRIANGULAR["template_id"]: lambda p: str(p["k"] * (p["k"] + 1) // 2),
    COIN["template_id"]: lambda p: repr((p["t"] * (p["t"] - 1) // 2) / (2 ** p["t"])),
    SUBSETS["template_id"]: lambda p: str(2 ** p["s"]),
}

POOLS = {
    CAYLEY["template_id"]: [{"n": v} for v in CAYLEY_PRIMES],
    LATTICE["template_id"]: [
        {"m": m, "n": n} for m, n in product([3, 4, 5, 6, 7], [3, 5, 8, 10, 12])
    ],
    TRIANGULAR["template_id"]: [{"k": v} for v in [10, 15, 20, 25, 30, 40, 50, 60, 75, 99]],
    COIN["template_id"]: [{"t": v} for v in [4, 5, 6, 8, 10, 12, 16, 20, 24, 30]],
    SUBSETS["template_id"]: [{"s": v} for v in [8, 10, 12, 16, 20, 24, 32, 40, 52, 64]],
}

MANIFEST = [
    {
        "paper_id": "jalg-2026-0142",
        "title": "Energy of singular Cayley graphs over symmetric groups",
        "venue": "Journal of Algebra",
        "publication_date": "2026-01-15",
        "msc_codes": [],
        "computable_flag": "yes",
        "authority_tier": 1,
    },
    {
        "paper_id": "comb-2026-0515",
        "title": "Enumerative identities for restricted lattice structures",
        "venue": "Journal of Combinatorial Theory, Series A",
        "publication_date": "2026-02-20",
        "msc_codes": ["05"],
        "computable_flag": "yes",
        "authority_tier": 1,
    },
    {
        "paper_id": "prob-2026-0777",
        "title": "Exact tail probabilities for bounded Bernoulli sums",
        "venue": "Annals of Applied Probability",
        "publication_date": "2026-04-02",
        "msc_codes": ["60"],
        "computable_flag": "yes",
        "authority_tier": 1,
    },
    {
        "paper_id": "meduc-2026-0031",
        "title": "Teaching combinatorial identities in secondary classrooms",
        "venue": "Educational Studies in Mathematics",
        "publication_date": "2026-03-10",
        "msc_codes": [],
        "computable_flag": "yes",
        "authority_tier": 2,
    },
    {
        "paper_id": "aif-2023-0881",
        "title": "Spectral gaps of arithmetic quotients",
        "venue": "Annales de l'Institut Fourier",
        "publication_date": "2023-02-01",
        "msc_codes": ["11"],
        "computable_flag": "yes",
        "authority_tier": 2,
    },
]

REFERENCE_CORPUS = [
    "Prove that the square root of 2 is irrational.",
    "Find all real solutions of the equation x^2 - 5x + 6 = 0.",
    "A bag contains 3 red and 5 blue marbles; two are drawn without replacement. What is the probability both are red?",
    "Show that the sum of the interior angles of a triangle is 180 degrees.",
    "Evaluate the integral of x * exp(x) dx from 0 to 1.",
    "How many positive divisors does 360 have?",
    "Determine the greatest common divisor of 1071 and 462 using the Euclidean algorithm.",
    "Let f(x) = x^3 - 3x. Find all local extrema of f.",
]

# A structurally valid draft with an undeclared placeholder and no value_check:
# the validator must reject it during generation.
BROKEN_DRAFT = {
    "template_id": "abstract_algebra_broken_002",
    "target_paper_module": "Scratch draft",
    "core_math_concept": "Incomplete sketch",
    "param_definition": [
        {"var_name": "n", "var_type": "Integer", "var_constraint": "n in [2, 3]", "var_source": "Pool"}
    ],
    "problem_template": "Compute ${q}$ for n = {n}.",
    "output_type": "Integer",
    "param_generation_rule": ["Step1: Pick n."],
    "natural_lang_solution": "Solution: substitute {n}.",
    "formal_solution": "n = {n}\n\nresult = n\n\nprint(result)",
    "validation_rule": [
        {"type": "param_check", "rule": "n in [2, 3]"},
        {"type": "execution_check", "rule": "formal_solution executes without error"},
    ],
}


def template_text(payload: dict) -> str:
    """Canonical single-record text, exactly what an agent draft would carry."""
    return canonical_dumps(template_to_payload(parse_meta_template(payload)))


def job_entry(script: str, params: dict, template_id: str) -> dict:
    value = ORACLES[template_id](params)
    return {
        "name": f"{template_id}:{json.dumps(params, sort_keys=True)}",
        "script": script,
        "timeout_s": 30,
        "memory_mb": 512,
        "status": "success",
        "value": value,
        "stdout": value + "\n",
        "diagnostic": None,
    }


def build_executor_table() -> dict:
    jobs = []
    for payload in ALL_TEMPLATES:
        template = parse_meta_template(payload)
        for params in POOLS[template.template_id]:
            binding = ParamBinding(assignments=params, seed=0, template_id=template.template_id)
            script = build_script(template, binding)
            jobs.append(job_entry(script, params, template.template_id))
    return {"jobs": jobs}


def build_equivalence_jobs() -> dict:
    cayley = parse_meta_template(CAYLEY)
    lattice = parse_meta_template(LATTICE)
    triangular = parse_meta_template(TRIANGULAR)
    coin = parse_meta_template(COIN)
    subsets = parse_meta_template(SUBSETS)

    def scripted(template, params):
        binding = ParamBinding(assignments=params, seed=0, template_id=template.template_id)
        return job_entry(build_script(template, binding), params, template.template_id)

    jobs = [
        scripted(cayley, {"n": 5}),
        scripted(cayley, {"n": 7}),
        scripted(cayley, {"n": 181}),
        scripted(lattice, {"m": 5, "n": 8}),
        scripted(triangular, {"k": 99}),
        scripted(coin, {"t": 10}),
        scripted(subsets, {"s": 52}),
        {
            "name": "float-sqrt",
            "script": "import math\n\nresult = math.sqrt(2)\n\nprint(result)",
            "timeout_s": 30,
            "memory_mb": 512,
            "status": "success",
            "value": repr(math.sqrt(2)),
            "stdout": repr(math.sqrt(2)) + "\n",
            "diagnostic": None,
        },
        {
            "name": "zero-division",
            "script": "n = 0\n\nresult = 1 / n\n\nprint(result)",
            "timeout_s": 30,
            "memory_mb": 512,
            "status": "error",
            "value": None,
            "stdout": "",
            "diagnostic": "ZeroDivisionError: division by zero",
        },
        {
            "name": "infinite-loop",
            "script": "while True:\n    pass",
            "timeout_s": 1,
            "memory_mb": 512,
            "status": "timeout",
            "value": None,
            "stdout": "",
            "diagnostic": "wall clock limit exceeded",
        },
    ]
    assert len(jobs) == 10
    return {"jobs": jobs}


def build_transcript() -> list[dict]:
    def entry(role: str, payload: dict, response: str, avg_logprob: float | None) -> dict:
        return {
            "digest": request_digest(role, payload),
            "response": response,
            "avg_logprob": avg_logprob,
        }

    def draft(paper_id: str, index: int, response: str, avg_logprob: float) -> dict:
        return entry("meta_template", {"paper_id": paper_id, "draft_index": index}, response, avg_logprob)

    def translation(payload: dict) -> dict:
        template = parse_meta_template(payload)
        request = {"template_id": template.template_id, "template": template_to_payload(template)}
        return entry("code_translation", request, template.formal_solution, -0.05)

    rows: list[dict] = []
    rows.append(
        entry(
            "classification",
            {
                "paper_id": "jalg-2026-0142",
                "title": MANIFEST[0]["title"],
                "venue": MANIFEST[0]["venue"],
            },
            "Primary class: 20 (group theory). Secondary: 05 (combinatorics).",
            -0.11,
        )
    )
    rows.append(
        entry(
            "classification",
            {
                "paper_id": "meduc-2026-0031",
                "title": MANIFEST[3]["title"],
                "venue": MANIFEST[3]["venue"],
            },
            "This is a mathematics education study: 97.",
            -0.09,
        )
    )

    # jalg: one keeper among screened/invalid/unparseable drafts
    rows.append(draft("jalg-2026-0142", 0, template_text(CAYLEY), -0.08))
    rows.append(draft("jalg-2026-0142", 1, "A template could revolve around eigenvalues, maybe.", -1.9))
    rows.append(draft("jalg-2026-0142", 2, template_text(BROKEN_DRAFT), -0.3))
    rows.append(draft("jalg-2026-0142", 3, "Sketch: energy of something something.", -2.5))
    rows.append(draft("jalg-2026-0142", 4, '{"template_id": "trailing', -0.2))

    # comb: three keepers, drafting stops at the cap
    rows.append(draft("comb-2026-0515", 0, template_text(LATTICE), -0.12))
    rows.append(draft("comb-2026-0515", 1, template_text(SUBSETS), -0.2))
    rows.append(draft("comb-2026-0515", 2, template_text(TRIANGULAR), -0.1))

    # prob: one keeper, then fillers exercising every drop path
    rows.append(draft("prob-2026-0777", 0, template_text(COIN), -0.25))
    rows.append(draft("prob-2026-0777", 1, "The theorem resists templating.", -3.0))
    rows.append(draft("prob-2026-0777", 2, "not json at all {", -0.4))
    rows.append(draft("prob-2026-0777", 3, "another rambling half-idea", -1.2))
    rows.append(draft("prob-2026-0777", 4, template_text(BROKEN_DRAFT), -0.1))

    for payload in (CAYLEY, LATTICE, SUBSETS, TRIANGULAR, COIN):
        rows.append(translation(payload))
    return rows


def build_golden_instance() -> list[dict]:
    template = parse_meta_template(CAYLEY)
    binding = ParamBinding(assignments={"n": 181}, seed=0, template_id=template.template_id)
    value = str(2**180 * math.factorial(180))
    result = ExecutionResult(status="success", value=value, stdout=value + "\n")
    instance = instantiate(template, binding, result)
    return [instance_to_payload(instance)]


def write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path.relative_to(REPO)}")


def main() -> None:
    cayley_text = canonical_dumps([template_to_payload(parse_meta_template(CAYLEY))])
    suite_text = canonical_dumps([template_to_payload(parse_meta_template(p)) for p in ALL_TEMPLATES])
    write(FIXTURES / "cayley_graph_energy.template.json", cayley_text)
    write(FIXTURES / "fixture_suite.template.json", suite_text)
    write(FIXTURES / "cayley_golden.problems.json", canonical_dumps(build_golden_instance()))
    write(FIXTURES / "papers.manifest.json", canonical_dumps(MANIFEST))
    write(FIXTURES / "executor_table.json", canonical_dumps(build_executor_table()))
    write(FIXTURES / "executor_jobs.json", canonical_dumps(build_equivalence_jobs()))
    write(FIXTURES / "reference_corpus.txt", "\n".join(REFERENCE_CORPUS) + "\n")
    transcript_lines = [json.dumps(row, ensure_ascii=False) for row in build_transcript()]
    write(FIXTURES / "transcripts" / "generation.jsonl", "\n".join(transcript_lines) + "\n")


if __name__ == "__main__":
    main()
