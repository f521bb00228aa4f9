from .base import Domain, DomainInstance, SchemaError, Verdict
from .blocksworld import BlocksworldDomain
from .prontoqa import ProntoQADomain
from .sort import SortDomain

DOMAINS = {
    "sort": SortDomain,
    "blocksworld": BlocksworldDomain,
    "prontoqa": ProntoQADomain,
}


def get_domain(domain_id: str) -> Domain:
    try:
        return DOMAINS[domain_id]()
    except KeyError:
        raise ValueError(f"unknown domain {domain_id!r}; expected one of {sorted(DOMAINS)}") from None


__all__ = ["Domain", "DomainInstance", "SchemaError", "Verdict", "DOMAINS", "get_domain"]
