import os
from importlib import resources

import pytest

import coachplan as cp

HERE = os.path.dirname(__file__)
CORPUS_DIR = os.path.join(HERE, "corpus")

# Verbatim plan example used across parser tests: a pass followed by a JOIN
# that illegally contains two actions by the same agent.
SELF_JOIN_PLAN_TEXT = """\
pass_the_ball STRIKER {'SENDER': STRIKER, 'RECEIVER': JOLLY}
JOIN {pass_the_ball JOLLY {'SENDER': STRIKER, 'RECEIVER': JOLLY},
      kick_to_goal JOLLY {}}"""


@pytest.fixture(scope="session")
def domain():
    text = resources.files("coachplan.data").joinpath("domain.txt").read_text()
    return cp.parse_domain_file(text)


@pytest.fixture(scope="session")
def schemas():
    text = resources.files("coachplan.data").joinpath("actions.txt").read_text()
    return {s.action_id: s for s in cp.parse_action_file(text)}


@pytest.fixture(scope="session")
def roles(domain):
    return domain.roles


@pytest.fixture(scope="session")
def corpus_texts():
    texts = {}
    for name in sorted(os.listdir(CORPUS_DIR)):
        if name.endswith(".plan"):
            with open(os.path.join(CORPUS_DIR, name)) as fh:
                texts[name] = fh.read()
    return texts


@pytest.fixture(scope="session")
def corpus_plans(corpus_texts, schemas, roles):
    return {
        name: cp.parse_plan(text, schemas, roles)
        for name, text in corpus_texts.items()
    }


@pytest.fixture(scope="session")
def golden_dir():
    return str(resources.files("coachplan.data").joinpath("golden"))


@pytest.fixture(scope="session")
def data_dir():
    return str(resources.files("coachplan.data"))
