"""Constructed datasets shared between tests."""

from loadproxy.ingest import InteractionEvent


def filter_fixture(n_items, n_short, threshold=100, prefix="I"):
    """Events where exactly ``n_short`` items have fewer than ``threshold``
    distinct learners on first attempts.

    Short items get between 1 and ``threshold - 1`` learners; the ones with
    ``threshold - 1`` learners also get a repeat attempt from one learner,
    so counting raw attempts instead of first attempts would keep them.
    Long items get ``threshold`` or ``threshold + 1`` learners.
    """
    events = []
    for j in range(n_items):
        item = f"{prefix}{j:05d}"
        if j < n_short:
            n = 1 + (j * 37) % (threshold - 1)
            if j % 5 == 0:
                n = threshold - 1
        else:
            n = threshold + (j % 2)
        for i in range(n):
            events.append(InteractionEvent(f"L{i:04d}", item, float(10 * j + 1), (i + j) % 2))
        if n == threshold - 1:
            events.append(InteractionEvent("L0000", item, float(10 * j + 5), 1))
    return events
