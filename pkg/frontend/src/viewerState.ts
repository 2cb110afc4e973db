import type { EntryKind, Plan, PlanReadouts, SceneBundle, SelectionRecord } from './bundleSchema';
import { selectionRecordSchema } from './bundleSchema';

// Page-local state: which plan is active, which structures are shown,
// and how far the selection hand-off has progressed. The viewer never
// recomputes a number; every displayed value is taken verbatim from
// the bundle, so this module holds no geometry or arithmetic.

export const STRUCTURE_KEYS = [
    'st',
    'sv',
    'modiolar_wall',
    'ossicles',
    'facial_nerve',
    'chorda',
    'array',
    'centerline',
] as const;

export type StructureKey = (typeof STRUCTURE_KEYS)[number];

export const STRUCTURE_LABELS: Record<StructureKey, string> = {
    st: 'Scala tympani',
    sv: 'Scala vestibuli',
    modiolar_wall: 'Modiolar wall',
    ossicles: 'Ossicles',
    facial_nerve: 'Facial nerve',
    chorda: 'Chorda tympani',
    array: 'Electrode array',
    centerline: 'ST centerline',
};

export type SubmitPhase =
    | { kind: 'idle' }
    | { kind: 'in_flight'; record: SelectionRecord }
    | { kind: 'failed'; record: SelectionRecord; message: string }
    | { kind: 'recorded'; record: SelectionRecord }
    | { kind: 'rejected'; message: string };

export type SubmitResult =
    | { kind: 'recorded' }
    | { kind: 'duplicate'; message: string }
    | { kind: 'invalid'; message: string };

export class SelectionLockedError extends Error {
    constructor(message: string) {
        super(message);
        this.name = 'SelectionLockedError';
    }
}

export class ViewerState {
    readonly bundle: SceneBundle;
    private active = 0;
    private shown: Record<StructureKey, boolean>;
    private phase: SubmitPhase = { kind: 'idle' };

    constructor(bundle: SceneBundle) {
        this.bundle = bundle;
        this.shown = Object.fromEntries(
            STRUCTURE_KEYS.map((key) => [key, true]),
        ) as Record<StructureKey, boolean>;
    }

    get plans(): readonly Plan[] {
        return this.bundle.plans;
    }

    /** Entry-site labels in bundle order, for the selectable plan list. */
    planLabels(): string[] {
        return this.bundle.plans.map((plan) => plan.readouts.entry_site);
    }

    get activePlanIndex(): number {
        return this.active;
    }

    get activePlan(): Plan {
        const plan = this.bundle.plans[this.active];
        if (plan === undefined) {
            throw new RangeError(`no plan at index ${this.active}`);
        }
        return plan;
    }

    /** Exactly one plan is active at a time; switching touches nothing else. */
    setActivePlan(index: number): void {
        if (!Number.isInteger(index) || index < 0 || index >= this.bundle.plans.length) {
            throw new RangeError(`plan index ${index} out of range 0..${this.bundle.plans.length - 1}`);
        }
        this.active = index;
    }

    /** The active plan's display strings, verbatim from the bundle. */
    readouts(): PlanReadouts {
        return this.activePlan.readouts;
    }

    isShown(key: StructureKey): boolean {
        return this.shown[key];
    }

    setShown(key: StructureKey, on: boolean): void {
        this.shown = { ...this.shown, [key]: on };
    }

    get submitPhase(): SubmitPhase {
        return this.phase;
    }

    /** No new submission may start once one is recorded, refused, or in flight. */
    get selectionLocked(): boolean {
        return this.phase.kind === 'recorded'
            || this.phase.kind === 'rejected'
            || this.phase.kind === 'in_flight';
    }

    get selectedKind(): EntryKind | null {
        return this.phase.kind === 'recorded' ? this.phase.record.selected_entry_kind : null;
    }

    /** Selection record for the active plan, validated before it leaves the page. */
    makeRecord(timestamp: string): SelectionRecord {
        return selectionRecordSchema.parse({
            case_id: this.bundle.case_id,
            selected_entry_kind: this.activePlan.entry_kind,
            timestamp,
        });
    }

    /**
     * Run one selection hand-off through `send` (HTTP post, file save, ...).
     *
     * A failed transfer keeps the record and stays retryable; a recorded or
     * refused one locks the selection for good. Only one transfer may be in
     * flight at a time.
     */
    async submitSelection(
        send: (record: SelectionRecord) => Promise<SubmitResult>,
        timestamp?: string,
    ): Promise<SubmitPhase> {
        if (this.selectionLocked) {
            throw new SelectionLockedError(
                this.phase.kind === 'in_flight'
                    ? 'a submission is already in flight'
                    : 'the selection was already recorded',
            );
        }
        // retrying re-sends the original record rather than re-stamping it
        const record = this.phase.kind === 'failed'
            ? this.phase.record
            : this.makeRecord(timestamp ?? new Date().toISOString());
        this.phase = { kind: 'in_flight', record };
        let result: SubmitResult;
        try {
            result = await send(record);
        } catch (error) {
            const message = error instanceof Error ? error.message : String(error);
            this.phase = { kind: 'failed', record, message };
            return this.phase;
        }
        switch (result.kind) {
            case 'recorded':
                this.phase = { kind: 'recorded', record };
                break;
            case 'duplicate':
            case 'invalid':
                this.phase = { kind: 'rejected', message: result.message };
                break;
        }
        return this.phase;
    }
}
