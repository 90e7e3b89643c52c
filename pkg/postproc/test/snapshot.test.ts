import { mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import path from "path";

import { describe, expect, it } from "vitest";

import {
  SNAPSHOT_MAGIC,
  SNAPSHOT_VERSION,
  SnapshotError,
  readSnapshot,
  readSnapshotHeader,
} from "../src/snapshot";

const FIXTURES = path.join(__dirname, "fixtures");

/** A tiny well-formed snapshot built from scratch: n=2, the given planes. */
function makeSnapshot(planes: number[][], n = 2, t = 0.25): Buffer {
  const buf = Buffer.alloc(40 + 8 * n * n * planes.length);
  buf.writeBigUInt64LE(SNAPSHOT_MAGIC, 0);
  buf.writeBigUInt64LE(SNAPSHOT_VERSION, 8);
  buf.writeBigUInt64LE(BigInt(n), 16);
  buf.writeDoubleLE(6.283185307179586, 24);
  buf.writeDoubleLE(t, 32);
  planes.forEach((plane, k) => {
    plane.forEach((v, i) => buf.writeDoubleLE(v, 40 + 8 * (k * n * n + i)));
  });
  return buf;
}

function writeTmp(name: string, data: Buffer): string {
  const dir = mkdtempSync(path.join(tmpdir(), "snap-"));
  const file = path.join(dir, name);
  writeFileSync(file, data);
  return file;
}

describe("readSnapshotHeader", () => {
  it("parses a solver-written file", () => {
    const h = readSnapshotHeader(path.join(FIXTURES, "snap_0000.oddf"));
    expect(h.n).toBe(32);
    expect(h.t).toBe(0);
    expect(h.length).toBeCloseTo(2 * Math.PI, 12);
    expect(h.planes).toBe(3);
  });

  it("rejects a bad magic number", () => {
    const buf = makeSnapshot([[1, 1, 1, 1]]);
    buf[0] ^= 0xff;
    const file = writeTmp("bad.oddf", buf);
    expect(() => readSnapshotHeader(file)).toThrow(/bad magic/);
  });

  it("rejects a truncated header", () => {
    const file = writeTmp("short.oddf", Buffer.alloc(24));
    expect(() => readSnapshotHeader(file)).toThrow(/header truncated/);
  });

  it("rejects an unknown version", () => {
    const buf = makeSnapshot([[1, 1, 1, 1], [0, 0, 0, 0], [0, 0, 0, 0]]);
    buf.writeBigUInt64LE(9n, 8);
    const file = writeTmp("v9.oddf", buf);
    expect(() => readSnapshotHeader(file)).toThrow(/version 9/);
  });

  it("rejects a ragged payload", () => {
    const buf = makeSnapshot([[1, 1, 1, 1], [0, 0, 0, 0], [0, 0, 0, 0]]);
    const file = writeTmp("ragged.oddf", buf.subarray(0, buf.length - 8));
    expect(() => readSnapshotHeader(file)).toThrow(/whole 2x2 planes/);
  });

  it("rejects an impossible plane count", () => {
    const planes = Array.from({ length: 7 }, () => [0, 0, 0, 0]);
    const file = writeTmp("seven.oddf", makeSnapshot(planes));
    let caught: unknown;
    try {
      readSnapshotHeader(file);
    } catch (err) {
      caught = err;
    }
    expect(caught).toBeInstanceOf(SnapshotError);
    expect((caught as SnapshotError).message).toMatch(/7 planes/);
  });
});

describe("readSnapshot", () => {
  it("splits the payload into named fields", () => {
    const file = writeTmp(
      "fields.oddf",
      makeSnapshot([
        [1, 1.1, 0.9, 1],
        [0.5, -0.5, 0.25, 0],
        [0, 0, 1, -1],
      ])
    );
    const snap = readSnapshot(file);
    expect([...snap.rho]).toEqual([1, 1.1, 0.9, 1]);
    expect(snap.ux[1]).toBe(-0.5);
    expect(snap.uy[3]).toBe(-1);
    expect(snap.pi).toBeNull();
    expect(snap.Ux).toBeNull();
  });

  it("maps the optional planes by count", () => {
    const base = [
      [1, 1, 1, 1],
      [0, 0, 0, 0],
      [0, 0, 0, 0],
    ];
    const withU = readSnapshot(
      writeTmp("u.oddf", makeSnapshot([...base, [7, 7, 7, 7], [8, 8, 8, 8]]))
    );
    expect(withU.pi).toBeNull();
    expect(withU.Ux![0]).toBe(7);
    expect(withU.Uy![0]).toBe(8);

    const withAll = readSnapshot(
      writeTmp(
        "all.oddf",
        makeSnapshot([...base, [5, 5, 5, 5], [7, 7, 7, 7], [8, 8, 8, 8]])
      )
    );
    expect(withAll.pi![0]).toBe(5);
    expect(withAll.Ux![0]).toBe(7);
  });

  it("matches the raw bytes of a solver-written file", () => {
    const file = path.join(FIXTURES, "snap_0001.oddf");
    const snap = readSnapshot(file);
    const raw = readFileSync(file);
    expect(snap.rho[0]).toBe(raw.readDoubleLE(40));
    const count = snap.n * snap.n;
    expect(snap.uy[count - 1]).toBe(raw.readDoubleLE(40 + 8 * (3 * count - 1)));
  });
});
