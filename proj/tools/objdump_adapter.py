#!/usr/bin/env python3
"""Line-protocol disassembler adapter backed by GNU objdump.

Reads `disasm <path> 0x<address> <length>` requests on stdin and answers each
with one JSON line on stdout.
"""
import json
import os
import re
import subprocess
import sys

OBJDUMP = os.environ.get("OBJDUMP", "objdump")
PREFIXES = {"rep", "repz", "repe", "repnz", "repne", "lock", "bnd", "notrack",
            "data16", "addr32", "cs", "ds", "es", "fs", "gs", "ss"}
LINE = re.compile(r"^\s*([0-9a-f]+):\t(.*)$")


def split_instruction(text):
    text = text.strip()
    words = text.split()
    mnemonic = []
    while words and words[0] in PREFIXES:
        mnemonic.append(words.pop(0))
    if not words:
        return " ".join(mnemonic), ""
    mnemonic.append(words[0])
    rest = text.split(None, len(mnemonic))
    operands = rest[len(mnemonic)] if len(rest) > len(mnemonic) else ""
    return " ".join(mnemonic), operands.strip()


def disassemble(path, address, length):
    cmd = [OBJDUMP, "-d", "-M", "intel", "--no-show-raw-insn", "-w",
           f"--start-address={address:#x}", f"--stop-address={address + length:#x}", path]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        return {"error": proc.stderr.strip() or f"objdump exited {proc.returncode}"}
    out = []
    for line in proc.stdout.splitlines():
        m = LINE.match(line)
        if not m:
            continue
        mnemonic, operands = split_instruction(m.group(2))
        if not mnemonic or mnemonic == "...":
            continue
        out.append({"address": int(m.group(1), 16), "mnemonic": mnemonic, "operands": operands})
    return {"instructions": out}


def handle(line):
    parts = line.split()
    if len(parts) != 4 or parts[0] != "disasm":
        return {"error": "expected: disasm <path> 0x<address> <length>"}
    try:
        address = int(parts[2], 16)
        length = int(parts[3], 0)
    except ValueError:
        return {"error": "bad address or length"}
    if length == 0:
        return {"instructions": []}
    return disassemble(parts[1], address, length)


def main():
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        sys.stdout.write(json.dumps(handle(line)) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
