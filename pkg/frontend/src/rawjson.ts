/**
 * JSON parsing that preserves each number's source text.
 *
 * The dashboard must display service numbers byte-for-byte as the service
 * serialized them, so numbers parse into RawNumber wrappers whose toString()
 * returns the original token. Everything else parses as plain values.
 */

export class RawNumber {
  constructor(public readonly raw: string, public readonly value: number) {}
  toString(): string {
    return this.raw;
  }
  toJSON(): number {
    return this.value;
  }
}

export type RawValue =
  | null
  | boolean
  | string
  | RawNumber
  | RawValue[]
  | { [key: string]: RawValue };

const NUMBER_RE = /^-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?/;

class Parser {
  private pos = 0;
  constructor(private readonly text: string) {}

  parse(): RawValue {
    const value = this.parseValue();
    this.skipWhitespace();
    if (this.pos !== this.text.length) {
      throw new SyntaxError(`trailing content at offset ${this.pos}`);
    }
    return value;
  }

  private skipWhitespace(): void {
    while (this.pos < this.text.length && " \t\n\r".includes(this.text[this.pos]!)) {
      this.pos += 1;
    }
  }

  private parseValue(): RawValue {
    this.skipWhitespace();
    const ch = this.text[this.pos];
    if (ch === undefined) throw new SyntaxError("unexpected end of input");
    if (ch === "{") return this.parseObject();
    if (ch === "[") return this.parseArray();
    if (ch === '"') return this.parseString();
    if (this.text.startsWith("true", this.pos)) {
      this.pos += 4;
      return true;
    }
    if (this.text.startsWith("false", this.pos)) {
      this.pos += 5;
      return false;
    }
    if (this.text.startsWith("null", this.pos)) {
      this.pos += 4;
      return null;
    }
    // Python's json module may emit these for non-finite floats
    for (const token of ["NaN", "Infinity", "-Infinity"]) {
      if (this.text.startsWith(token, this.pos)) {
        this.pos += token.length;
        return new RawNumber(token, Number(token === "NaN" ? NaN : token));
      }
    }
    const match = NUMBER_RE.exec(this.text.slice(this.pos));
    if (match) {
      const raw = match[0];
      this.pos += raw.length;
      return new RawNumber(raw, Number(raw));
    }
    throw new SyntaxError(`unexpected character ${ch!} at offset ${this.pos}`);
  }

  private parseString(): string {
    // delegate escape handling to the native parser
    const start = this.pos;
    this.pos += 1;
    while (this.pos < this.text.length) {
      const ch = this.text[this.pos];
      if (ch === "\\") {
        this.pos += 2;
        continue;
      }
      if (ch === '"') {
        this.pos += 1;
        return JSON.parse(this.text.slice(start, this.pos)) as string;
      }
      this.pos += 1;
    }
    throw new SyntaxError("unterminated string");
  }

  private parseArray(): RawValue[] {
    this.pos += 1; // [
    const items: RawValue[] = [];
    this.skipWhitespace();
    if (this.text[this.pos] === "]") {
      this.pos += 1;
      return items;
    }
    for (;;) {
      items.push(this.parseValue());
      this.skipWhitespace();
      const ch = this.text[this.pos];
      if (ch === ",") {
        this.pos += 1;
        continue;
      }
      if (ch === "]") {
        this.pos += 1;
        return items;
      }
      throw new SyntaxError(`expected , or ] at offset ${this.pos}`);
    }
  }

  private parseObject(): { [key: string]: RawValue } {
    this.pos += 1; // {
    const obj: { [key: string]: RawValue } = {};
    this.skipWhitespace();
    if (this.text[this.pos] === "}") {
      this.pos += 1;
      return obj;
    }
    for (;;) {
      this.skipWhitespace();
      if (this.text[this.pos] !== '"') {
        throw new SyntaxError(`expected string key at offset ${this.pos}`);
      }
      const key = this.parseString();
      this.skipWhitespace();
      if (this.text[this.pos] !== ":") {
        throw new SyntaxError(`expected : at offset ${this.pos}`);
      }
      this.pos += 1;
      obj[key] = this.parseValue();
      this.skipWhitespace();
      const ch = this.text[this.pos];
      if (ch === ",") {
        this.pos += 1;
        continue;
      }
      if (ch === "}") {
        this.pos += 1;
        return obj;
      }
      throw new SyntaxError(`expected , or } at offset ${this.pos}`);
    }
  }
}

export function parseRaw(text: string): RawValue {
  return new Parser(text).parse();
}

/** Displayed form of a service value: number tokens verbatim, rest stringified. */
export function display(value: RawValue | undefined): string {
  if (value === undefined || value === null) return "";
  if (value instanceof RawNumber) return value.raw;
  return String(value);
}

/** The numeric value behind a RawValue (for geometry, never for display). */
export function numeric(value: RawValue | undefined): number {
  if (value instanceof RawNumber) return value.value;
  if (typeof value === "number") return value;
  throw new TypeError(`expected a number, got ${typeof value}`);
}
