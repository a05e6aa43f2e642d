#!/usr/bin/env python3
"""Regenerates the golden vectors in this directory.

Every encoder here is written from the format descriptions, independently of
the Rust code. Run from any directory: python3 gen.py
"""

import hashlib
import ipaddress
import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))


def varint(n):
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def prefixed(b):
    return varint(len(b)) + b


B58 = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"


def b58(data):
    n = int.from_bytes(data, "big")
    s = ""
    while n:
        n, r = divmod(n, 58)
        s = B58[r] + s
    zeros = len(data) - len(data.lstrip(b"\0"))
    return "1" * zeros + s


def stream(seed, length):
    """sha256(seed || counter_le32) blocks, concatenated and truncated."""
    out = bytearray()
    i = 0
    while len(out) < length:
        out += hashlib.sha256(seed.encode() + i.to_bytes(4, "little")).digest()
        i += 1
    return bytes(out[:length])


# multihash

HASHES = {
    "identity": (0x00, lambda d: d),
    "sha1": (0x11, lambda d: hashlib.sha1(d).digest()),
    "sha2-256": (0x12, lambda d: hashlib.sha256(d).digest()),
    "sha2-512": (0x13, lambda d: hashlib.sha512(d).digest()),
}


def multihash_vectors():
    inputs = [b"", b"a", b"hello world", b"The quick brown fox jumps over the lazy dog", stream("mh", 300)]
    rows = []
    for name, (code, fn) in HASHES.items():
        for data in inputs:
            if name == "identity" and len(data) > 127:
                continue
            digest = fn(data)
            mh = varint(code) + prefixed(digest)
            rows.append({"function": name, "code": code, "input": data.hex(), "multihash": mh.hex(), "base58": b58(mh)})
    return rows


# multiaddr

CODES = {"ip4": 4, "tcp": 6, "udp": 273, "ip6": 41, "sctp": 132, "sim": 0x0300}


def multiaddr_bytes(text):
    parts = text.strip("/").split("/")
    out = bytearray()
    for proto, value in zip(parts[::2], parts[1::2]):
        out += varint(CODES[proto])
        if proto == "ip4":
            out += ipaddress.IPv4Address(value).packed
        elif proto == "ip6":
            out += ipaddress.IPv6Address(value).packed
        elif proto == "sim":
            out += varint(int(value))
        else:
            out += int(value).to_bytes(2, "big")
    return bytes(out)


def canonical_multiaddr(text):
    parts = text.strip("/").split("/")
    out = []
    for proto, value in zip(parts[::2], parts[1::2]):
        if proto == "ip6":
            value = str(ipaddress.IPv6Address(value))
        out += [proto, value]
    return "/" + "/".join(out)


def multiaddr_vectors():
    texts = [
        "/ip4/127.0.0.1/tcp/4001",
        "/ip4/1.2.3.4/udp/1234",
        "/ip4/0.0.0.0/tcp/0",
        "/ip4/255.255.255.255/tcp/65535",
        "/ip6/::1/tcp/8080",
        "/ip6/2001:db8::ff00:42:8329/udp/53",
        "/ip4/10.0.0.1/sctp/5000",
        "/sim/0",
        "/sim/300",
        "/ip4/192.168.0.1/tcp/80/ip4/10.1.1.1/udp/9",
    ]
    rows = []
    for t in texts:
        canonical = canonical_multiaddr(t)
        rows.append({"text": t, "canonical": canonical, "bytes": multiaddr_bytes(t).hex()})
    return rows


# canonical objects

def encode_object(links, data):
    out = varint(len(links))
    for name, mh, size in links:
        out += prefixed(name.encode()) + prefixed(mh) + varint(size)
    return out + prefixed(data)


def sha256_mh(data):
    return b"\x12\x20" + hashlib.sha256(data).digest()


def object_vectors():
    cases = [
        ("empty", [], b""),
        ("leaf", [], b"hello"),
        ("one link", [("bar", b"child", 300)], b"hi"),
        ("two links", [("a", b"a", 1), ("b", b"b", 127)], b""),
        ("unnamed links", [("", b"x", 128), ("", b"y", 16384)], b"\x01\x02"),
        ("utf8 name", [("café", b"cafe", 5)], b"data"),
        ("large data", [], stream("obj", 200)),
    ]
    rows = []
    for label, links, data in cases:
        resolved = [(n, sha256_mh(t), s) for n, t, s in links]
        enc = encode_object(resolved, data)
        rows.append(
            {
                "label": label,
                "links": [{"name": n, "hash": mh.hex(), "size": s} for n, mh, s in resolved],
                "data": data.hex(),
                "encoded": enc.hex(),
                "key": b58(sha256_mh(enc)),
            }
        )
    return rows


# base58

def base58_vectors():
    inputs = [b"", b"\0", b"\0\0\x01", b"a", b"hello world", bytes(range(1, 40)), stream("b58", 64)]
    return [{"bytes": d.hex(), "base58": b58(d)} for d in inputs]


# proquint

CONS = "bdfghjklmnprstvz"
VOWS = "aiou"


def proquint(data):
    words = []
    for i in range(0, len(data), 2):
        w = int.from_bytes(data[i : i + 2], "big")
        words.append(
            CONS[(w >> 12) & 15] + VOWS[(w >> 10) & 3] + CONS[(w >> 6) & 15] + VOWS[(w >> 4) & 3] + CONS[w & 15]
        )
    return "-".join(words)


def proquint_vectors():
    inputs = [bytes([127, 0, 0, 1]), bytes([63, 84, 220, 193]), b"\0\0", b"\xff\xff", stream("pq", 32)]
    return [{"bytes": d.hex(), "proquint": proquint(d)} for d in inputs]


# rabin boundaries

POLY = 0x3DA3358B4DC173


def gf2_mod(x, p):
    dp = p.bit_length()
    while x.bit_length() >= dp:
        x ^= p << (x.bit_length() - dp)
    return x


def rabin_boundaries(data, window=48, min_size=2048, avg=8192, max_size=65536, poly=POLY):
    """Cut where the fingerprint of the trailing `window` bytes, reduced mod
    the polynomial, has all low log2(avg) bits set; never before `min_size`
    bytes into a chunk, and always at `max_size`."""
    mask = avg - 1
    top = gf2_mod(1 << (8 * (window - 1)), poly)

    def drop(b):
        # b * x^(8(window-1)) mod p, by carry-less multiplication
        acc = 0
        for bit in range(8):
            if b >> bit & 1:
                acc ^= top << bit
        return gf2_mod(acc, poly)

    out = []
    start = 0
    n = len(data)
    while n - start > min_size:
        limit = min(start + max_size, n)
        pos = start + min_size
        fp = gf2_mod(int.from_bytes(data[pos - window : pos], "big"), poly)
        cut = limit
        while True:
            if fp & mask == mask:
                cut = pos
                break
            if pos >= limit:
                break
            fp = gf2_mod(((fp ^ drop(data[pos - window])) << 8) | data[pos], poly)
            pos += 1
        out.append(cut)
        start = cut
    if not out or out[-1] != n:
        out.append(n)
    return out


def rabin_vectors():
    rows = []
    for seed, length in [("rabin-a", 150_000), ("rabin-b", 90_000), ("rabin-c", 3_000)]:
        data = stream(seed, length)
        rows.append({"seed": seed, "length": length, "boundaries": rabin_boundaries(data)})
    rows.append({"seed": "zeros", "length": 140_000, "boundaries": rabin_boundaries(bytes(140_000))})
    return rows


def main():
    outputs = {
        "multihash.json": multihash_vectors(),
        "multiaddr.json": multiaddr_vectors(),
        "object.json": object_vectors(),
        "base58.json": base58_vectors(),
        "proquint.json": proquint_vectors(),
        "rabin.json": rabin_vectors(),
    }
    for name, rows in outputs.items():
        with open(os.path.join(HERE, name), "w") as f:
            json.dump(rows, f, indent=1)
            f.write("\n")


if __name__ == "__main__":
    main()
