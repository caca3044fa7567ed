"""Privacy-enhanced participatory sensing.

Two instantiations share one broker: a blind-anonymous IBE construction
(:mod:`pepsi.protocol`) and a blind-RSA oblivious PRF construction
(:mod:`pepsi.oprf`).  Mobile nodes upload ``(tag, ciphertext)`` reports,
queriers upload tags, and the broker matches the two by byte equality
without learning what either refers to.
"""

__version__ = "0.1.0"
