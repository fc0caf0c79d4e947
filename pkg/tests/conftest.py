from pathlib import Path

import pytest

from conceptdb import algebra as alg
from conceptdb import interp
from conceptdb.coql import parse_query

REPO = Path(__file__).resolve().parent.parent
SCRIPTS = REPO / "scripts"
DATA = Path(__file__).resolve().parent / "data"


def build_demo(name: str) -> interp.Session:
    session = interp.new_session()
    report = interp.run_script_file(session, SCRIPTS / name / f"{name}.coql")
    assert not report.failed, report.output
    return session


@pytest.fixture(scope="session")
def bankdemo():
    return build_demo("bankdemo")


@pytest.fixture(scope="session")
def shopdemo():
    return build_demo("shopdemo")


@pytest.fixture(scope="session")
def sportdemo():
    return build_demo("sportdemo")


@pytest.fixture(scope="session")
def corpus_records():
    text = (DATA / "query_corpus.coql").read_text()
    return [r for r in text.split("\n---\n") if r.strip()]


def query(session: interp.Session, text: str):
    ev = alg.Evaluator(session.db, session.variables)
    return ev.eval(parse_query(text))


def query_ids(session: interp.Session, text: str) -> set:
    return {m.text() for m in query(session, text).members}
