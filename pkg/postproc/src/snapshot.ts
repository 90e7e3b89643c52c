/**
 * Reader for the simulator's binary field snapshots (.oddf).
 *
 * Layout: five little-endian 64-bit header values — magic 0x4F444446
 * ("ODDF"), format version, grid size n (u64), box length L, time t
 * (f64) — followed by row-major f64 planes: rho, u_x, u_y, then
 * optionally pi and/or U_x, U_y (3 to 6 planes, implied by file size).
 */

import { readFileSync } from "fs";

export const SNAPSHOT_MAGIC = 0x4f444446n;
export const SNAPSHOT_VERSION = 1n;
const HEADER_BYTES = 40;

export interface SnapshotHeader {
  file: string;
  n: number;
  length: number;
  t: number;
  planes: number;
}

export interface SnapshotData extends SnapshotHeader {
  rho: Float64Array;
  ux: Float64Array;
  uy: Float64Array;
  pi: Float64Array | null;
  Ux: Float64Array | null;
  Uy: Float64Array | null;
}

export class SnapshotError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SnapshotError";
  }
}

function parseHeader(file: string, buf: Buffer): SnapshotHeader {
  if (buf.length < HEADER_BYTES) {
    throw new SnapshotError(`snapshot header truncated in ${file}`);
  }
  if (buf.readBigUInt64LE(0) !== SNAPSHOT_MAGIC) {
    throw new SnapshotError(`${file} is not a snapshot file (bad magic)`);
  }
  const version = buf.readBigUInt64LE(8);
  if (version !== SNAPSHOT_VERSION) {
    throw new SnapshotError(`unsupported snapshot version ${version} in ${file}`);
  }
  const n = Number(buf.readBigUInt64LE(16));
  const plane = 8 * n * n;
  const payload = buf.length - HEADER_BYTES;
  if (plane === 0 || payload % plane !== 0) {
    throw new SnapshotError(
      `snapshot payload of ${payload} bytes does not hold whole ${n}x${n} planes in ${file}`
    );
  }
  const planes = payload / plane;
  if (planes < 3 || planes > 6) {
    throw new SnapshotError(
      `snapshot holds ${planes} planes in ${file}; expected 3-6 (rho, u_x, u_y [, pi] [, U_x, U_y])`
    );
  }
  return { file, n, length: buf.readDoubleLE(24), t: buf.readDoubleLE(32), planes };
}

/** Header only — cheap metadata probe used for plot annotations. */
export function readSnapshotHeader(file: string): SnapshotHeader {
  return parseHeader(file, readFileSync(file));
}

export function readSnapshot(file: string): SnapshotData {
  const buf = readFileSync(file);
  const header = parseHeader(file, buf);
  const count = header.n * header.n;
  const planeAt = (k: number) => {
    const start = HEADER_BYTES + 8 * count * k;
    // copy out so the view owns aligned memory independent of the Buffer pool
    const out = new Float64Array(count);
    for (let i = 0; i < count; i++) out[i] = buf.readDoubleLE(start + 8 * i);
    return out;
  };
  const p = header.planes;
  return {
    ...header,
    rho: planeAt(0),
    ux: planeAt(1),
    uy: planeAt(2),
    pi: p === 4 || p === 6 ? planeAt(3) : null,
    Ux: p >= 5 ? planeAt(p - 2) : null,
    Uy: p >= 5 ? planeAt(p - 1) : null,
  };
}
