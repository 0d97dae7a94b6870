"""Offline helper: turn a SMILES column into kekulized heavy-atom SMILES.

Usage: python kekulize_corpus.py INPUT.csv OUTPUT.smi [--column smiles]

Needs RDKit. The C++ loader only reads the output file.
"""

import argparse
import csv
import sys

from rdkit import Chem, RDLogger


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("input")
    ap.add_argument("output")
    ap.add_argument("--column", default="smiles")
    args = ap.parse_args()
    RDLogger.DisableLog("rdApp.*")

    kept = failed = 0
    with open(args.input, newline="") as src, open(args.output, "w") as dst:
        dst.write(f"# kekulized from {args.input.split('/')[-1]}, hydrogens removed\n")
        for row in csv.DictReader(src):
            mol = Chem.MolFromSmiles(row[args.column])
            if mol is None:
                failed += 1
                continue
            mol = Chem.RemoveHs(mol)
            Chem.Kekulize(mol, clearAromaticFlags=True)
            dst.write(Chem.MolToSmiles(mol, kekuleSmiles=True, canonical=True) + "\n")
            kept += 1
    print(f"kept {kept}, unparseable {failed}", file=sys.stderr)


if __name__ == "__main__":
    main()
