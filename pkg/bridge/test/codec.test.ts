import { describe, expect, it } from "vitest";

import {
  CodecError,
  decodeSentenceStore,
  decodeTokenStore,
  encodeSentenceStore,
  encodeTokenStore,
} from "../src/codec.js";

describe("sentence store codec", () => {
  it("matches the format byte for byte on a golden record", () => {
    const buf = encodeSentenceStore([{ id: "ab", vector: new Float32Array([1.0, -2.0]) }]);
    const expected = Buffer.alloc(4 + 4 + 4 + 8 + 4 + 2 + 8);
    let o = 0;
    expected.write("RBQE", o, "ascii"); o += 4;
    expected.writeUInt32LE(1, o); o += 4;          // version
    expected.writeUInt32LE(2, o); o += 4;          // dim
    expected.writeBigUInt64LE(1n, o); o += 8;      // count
    expected.writeUInt32LE(2, o); o += 4;          // id length
    expected.write("ab", o, "utf-8"); o += 2;
    expected.writeFloatLE(1.0, o); o += 4;
    expected.writeFloatLE(-2.0, o); o += 4;
    expect(buf.equals(expected)).toBe(true);
  });

  it("round-trips records exactly", () => {
    const records = Array.from({ length: 20 }, (_, i) => ({
      id: `id${i}`,
      vector: new Float32Array([i, i * 0.5, -i, 1 / (i + 1)].map(Math.fround)),
    }));
    const { dim, records: decoded } = decodeSentenceStore(encodeSentenceStore(records));
    expect(dim).toBe(4);
    expect(decoded.length).toBe(20);
    decoded.forEach((rec, i) => {
      expect(rec.id).toBe(records[i].id);
      expect([...rec.vector]).toEqual([...records[i].vector]);
    });
  });

  it("rejects duplicate ids, empty stores, and dim mismatches", () => {
    const v = new Float32Array([1, 2]);
    expect(() => encodeSentenceStore([])).toThrow(CodecError);
    expect(() => encodeSentenceStore([{ id: "a", vector: v }, { id: "a", vector: v }]))
      .toThrow(/duplicate/);
    expect(() =>
      encodeSentenceStore([
        { id: "a", vector: v },
        { id: "b", vector: new Float32Array(3) },
      ]),
    ).toThrow(/dim/);
  });

  it("rejects non-finite values", () => {
    expect(() =>
      encodeSentenceStore([{ id: "a", vector: new Float32Array([1, Number.NaN]) }]),
    ).toThrow(/non-finite/);
  });

  it("detects truncation, bad magic, bad version, trailing bytes", () => {
    const good = encodeSentenceStore([{ id: "a", vector: new Float32Array([1, 2]) }]);
    expect(() => decodeSentenceStore(good.subarray(0, good.length - 2))).toThrow(/truncated/);
    const badMagic = Buffer.from(good);
    badMagic.write("NOPE", 0, "ascii");
    expect(() => decodeSentenceStore(badMagic)).toThrow(/magic/);
    const badVersion = Buffer.from(good);
    badVersion.writeUInt32LE(9, 4);
    expect(() => decodeSentenceStore(badVersion)).toThrow(/version/);
    expect(() => decodeSentenceStore(Buffer.concat([good, Buffer.from([0])])))
      .toThrow(/trailing/);
  });
});

describe("token store codec", () => {
  it("round-trips variable-length records", () => {
    const records = [
      { id: "x", values: new Float32Array([1, 2, 3, 4, 5, 6]), tokens: 3 }, // 3 x 2
      { id: "y", values: new Float32Array([7, 8]), tokens: 1 },
    ];
    const { dim, records: decoded } = decodeTokenStore(encodeTokenStore(records, 2));
    expect(dim).toBe(2);
    expect(decoded[0].tokens).toBe(3);
    expect([...decoded[0].values]).toEqual([1, 2, 3, 4, 5, 6]);
    expect(decoded[1].tokens).toBe(1);
  });

  it("rejects zero-token records and shape mismatches", () => {
    expect(() =>
      encodeTokenStore([{ id: "a", values: new Float32Array(0), tokens: 0 }], 2),
    ).toThrow(/token row/);
    expect(() =>
      encodeTokenStore([{ id: "a", values: new Float32Array(5), tokens: 2 }], 2),
    ).toThrow(/values/);
  });
});
