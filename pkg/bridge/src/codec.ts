/**
 * Binary codec for the engine's embedding store formats (little-endian).
 *
 * Sentence store: magic "RBQE" | u32 version=1 | u32 dim | u64 count,
 *                 then per record [u32 idLen, id UTF-8, dim × f32].
 * Token store:    magic "RBQT" | same header,
 *                 then per record [u32 idLen, id UTF-8, u32 tokens, tokens × dim × f32].
 */

export const SENTENCE_MAGIC = "RBQE";
export const TOKEN_MAGIC = "RBQT";
export const FORMAT_VERSION = 1;

export interface SentenceRecord {
  id: string;
  vector: Float32Array;
}

export interface TokenRecord {
  id: string;
  /** Row-major (tokens × dim) values. */
  values: Float32Array;
  tokens: number;
}

export class CodecError extends Error {}

function checkFinite(id: string, values: Float32Array): void {
  for (const v of values) {
    if (!Number.isFinite(v)) {
      throw new CodecError(`record ${id}: non-finite value`);
    }
  }
}

function checkIds(ids: Iterable<string>): void {
  const seen = new Set<string>();
  for (const id of ids) {
    if (seen.has(id)) throw new CodecError(`duplicate id ${id}`);
    seen.add(id);
  }
}

class Writer {
  private chunks: Buffer[] = [];

  push(buf: Buffer): void {
    this.chunks.push(buf);
  }

  header(magic: string, dim: number, count: number): void {
    const head = Buffer.alloc(20);
    head.write(magic, 0, "ascii");
    head.writeUInt32LE(FORMAT_VERSION, 4);
    head.writeUInt32LE(dim, 8);
    head.writeBigUInt64LE(BigInt(count), 12);
    this.push(head);
  }

  id(id: string): void {
    const raw = Buffer.from(id, "utf-8");
    const len = Buffer.alloc(4);
    len.writeUInt32LE(raw.length, 0);
    this.push(len);
    this.push(raw);
  }

  u32(value: number): void {
    const buf = Buffer.alloc(4);
    buf.writeUInt32LE(value, 0);
    this.push(buf);
  }

  floats(values: Float32Array): void {
    // copy: the source array may be a view over a larger buffer
    this.push(Buffer.from(new Float32Array(values).buffer));
  }

  finish(): Buffer {
    return Buffer.concat(this.chunks);
  }
}

export function encodeSentenceStore(records: SentenceRecord[]): Buffer {
  if (records.length === 0) throw new CodecError("cannot write an empty store");
  const dim = records[0].vector.length;
  checkIds(records.map((r) => r.id));
  const w = new Writer();
  w.header(SENTENCE_MAGIC, dim, records.length);
  for (const rec of records) {
    if (rec.vector.length !== dim) {
      throw new CodecError(`record ${rec.id}: dim ${rec.vector.length}, expected ${dim}`);
    }
    checkFinite(rec.id, rec.vector);
    w.id(rec.id);
    w.floats(rec.vector);
  }
  return w.finish();
}

export function encodeTokenStore(records: TokenRecord[], dim: number): Buffer {
  if (records.length === 0) throw new CodecError("cannot write an empty store");
  checkIds(records.map((r) => r.id));
  const w = new Writer();
  w.header(TOKEN_MAGIC, dim, records.length);
  for (const rec of records) {
    if (rec.tokens < 1) throw new CodecError(`record ${rec.id}: needs >= 1 token row`);
    if (rec.values.length !== rec.tokens * dim) {
      throw new CodecError(
        `record ${rec.id}: ${rec.values.length} values for ${rec.tokens} x ${dim}`,
      );
    }
    checkFinite(rec.id, rec.values);
    w.id(rec.id);
    w.u32(rec.tokens);
    w.floats(rec.values);
  }
  return w.finish();
}

class Reader {
  private offset = 0;

  constructor(private buf: Buffer) {}

  private need(size: number): void {
    if (this.offset + size > this.buf.length) {
      throw new CodecError(`truncated file at offset ${this.offset}`);
    }
  }

  magic(): string {
    this.need(4);
    const m = this.buf.toString("ascii", this.offset, this.offset + 4);
    this.offset += 4;
    return m;
  }

  u32(): number {
    this.need(4);
    const v = this.buf.readUInt32LE(this.offset);
    this.offset += 4;
    return v;
  }

  u64(): number {
    this.need(8);
    const v = this.buf.readBigUInt64LE(this.offset);
    this.offset += 8;
    return Number(v);
  }

  id(): string {
    const len = this.u32();
    this.need(len);
    const s = this.buf.toString("utf-8", this.offset, this.offset + len);
    this.offset += len;
    return s;
  }

  floats(count: number): Float32Array {
    this.need(count * 4);
    const out = new Float32Array(count);
    for (let i = 0; i < count; i++) {
      out[i] = this.buf.readFloatLE(this.offset + i * 4);
    }
    this.offset += count * 4;
    return out;
  }

  eof(): boolean {
    return this.offset === this.buf.length;
  }
}

function readHeader(r: Reader, magic: string): { dim: number; count: number } {
  const got = r.magic();
  if (got !== magic) throw new CodecError(`bad magic ${JSON.stringify(got)}, expected ${magic}`);
  const version = r.u32();
  if (version !== FORMAT_VERSION) throw new CodecError(`unsupported version ${version}`);
  const dim = r.u32();
  if (dim === 0) throw new CodecError("zero dimension");
  const count = r.u64();
  return { dim, count };
}

export function decodeSentenceStore(buf: Buffer): { dim: number; records: SentenceRecord[] } {
  const r = new Reader(buf);
  const { dim, count } = readHeader(r, SENTENCE_MAGIC);
  const records: SentenceRecord[] = [];
  for (let i = 0; i < count; i++) {
    const id = r.id();
    const vector = r.floats(dim);
    checkFinite(id, vector);
    records.push({ id, vector });
  }
  checkIds(records.map((rec) => rec.id));
  if (!r.eof()) throw new CodecError("trailing bytes after last record");
  return { dim, records };
}

export function decodeTokenStore(buf: Buffer): { dim: number; records: TokenRecord[] } {
  const r = new Reader(buf);
  const { dim, count } = readHeader(r, TOKEN_MAGIC);
  const records: TokenRecord[] = [];
  for (let i = 0; i < count; i++) {
    const id = r.id();
    const tokens = r.u32();
    if (tokens < 1) throw new CodecError(`record ${id}: zero tokens`);
    const values = r.floats(tokens * dim);
    checkFinite(id, values);
    records.push({ id, values, tokens });
  }
  checkIds(records.map((rec) => rec.id));
  if (!r.eof()) throw new CodecError("trailing bytes after last record");
  return { dim, records };
}
